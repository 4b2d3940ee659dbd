//! Sign conditions of the closed-loop field on the boundary strata of the
//! flow sets.

use rand::Rng;
use serde::Serialize;

use super::sampling::{on_sphere, rng, unit_vector_orthogonal};
use super::PropertyReport;
use crate::controller::{ControlLaw, Mode};
use crate::geometry::{pi_theta_apply, VecN};
use crate::sim::membership_tol;

/// Relative band kept clear of the sphere `‖x - c/2‖ = ‖c/2‖`, where the
/// stabilizing-mode signs change.
const CAP_BAND: f64 = 1e-6;
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stratum {
    /// `∂B_ε(c)` inside the open ball `B(c/2, ‖c/2‖)`, mode 0: `(x-c)ᵀκ > 0`.
    InnerShellCap,
    /// `∂B_{ε_s}(c)` outside `B(c/2, ‖c/2‖)`, mode 0: `(x-c)ᵀκ < 0`.
    OuterShellExit,
    /// `∂B_ε(c) ∩ F_m`, `|m| = 1`: `(x-c)ᵀκ = 0`.
    AvoidInnerShell,
    /// `∂B_{ε_h}(c) ∩ F_m`, `|m| = 1`: `(x-c)ᵀκ = 0`.
    AvoidOuterShell,
    /// Backward `ψ`-cone surface inside the helmet, `|m| = 1`: `nᵀκ >= 0`
    /// with `n = π^ψ(p_m - c)(x - c)`.
    AvoidCone,
    /// `∂B(μc, ‖μc‖) ∩ F_m` between the shells, `|m| = 1`: `(x-μc)ᵀκ < 0`.
    AvoidCapExit,
}

impl Stratum {
    pub const ALL: [Stratum; 6] = [
        Stratum::InnerShellCap,
        Stratum::OuterShellExit,
        Stratum::AvoidInnerShell,
        Stratum::AvoidOuterShell,
        Stratum::AvoidCone,
        Stratum::AvoidCapExit,
    ];

    fn modes(self) -> &'static [Mode] {
        match self {
            Stratum::InnerShellCap | Stratum::OuterShellExit => &[Mode::Stabilize],
            _ => &Mode::AVOIDANCE,
        }
    }
}

/// Draws one candidate point of the stratum, or `None` if the draw misses.
fn draw<R: Rng>(law: &ControlLaw, s: Stratum, m: Mode, rng: &mut R) -> Option<VecN> {
    let p = law.params();
    let c = p.center();
    let nc = c.norm();
    let tol = membership_tol(law);
    let half = c.scale(0.5);
    let in_flow = |x: &VecN| law.flow_set_contains(x, m, tol);
    let radius = |rng: &mut R| match rng.random_range(0..8) {
        0 => p.epsilon(),
        1 => p.eps_h(),
        _ => rng.random_range(p.epsilon()..=p.eps_h()),
    };
    match s {
        Stratum::InnerShellCap => {
            let x = on_sphere(rng, c, p.epsilon());
            (x.dist(&half) < 0.5 * nc * (1.0 - CAP_BAND)).then_some(x)
        }
        Stratum::OuterShellExit => {
            let x = on_sphere(rng, c, p.eps_s());
            (x.dist(&half) > 0.5 * nc * (1.0 + CAP_BAND)).then_some(x)
        }
        Stratum::AvoidInnerShell => Some(on_sphere(rng, c, p.epsilon())).filter(in_flow),
        Stratum::AvoidOuterShell => Some(on_sphere(rng, c, p.eps_h())).filter(in_flow),
        Stratum::AvoidCone => {
            let vhat = law.axis(m).normalized().expect("axis is nonzero");
            let w = unit_vector_orthogonal(rng, &vhat);
            let (sn, cs) = p.psi().sin_cos();
            let dir = vhat.scale(-cs).add_scaled(sn, &w);
            Some(c.add_scaled(radius(rng), &dir)).filter(in_flow)
        }
        Stratum::AvoidCapExit => {
            // point on the μ-sphere at distance ρ from c, at polar angle φ from ĉ
            let mu = p.mu();
            let rho = radius(rng);
            let cos_phi = ((rho / nc).powi(2) - (mu - 1.0).powi(2) - mu * mu) / (2.0 * mu * (mu - 1.0));
            if cos_phi.abs() > 1.0 {
                return None;
            }
            let chat = c.scale(1.0 / nc);
            let w = unit_vector_orthogonal(rng, &chat);
            let dir = chat.scale(cos_phi).add_scaled((1.0 - cos_phi * cos_phi).sqrt(), &w);
            Some(c.scale(mu).add_scaled(mu * nc, &dir)).filter(in_flow)
        }
    }
}

/// Signed margin of the stratum's sign condition at `x` (positive passes).
fn margin(law: &ControlLaw, s: Stratum, m: Mode, x: &VecN) -> f64 {
    let p = law.params();
    let c = p.center();
    let r = x - c;
    let u = law.kappa(x, m).expect("x != c on every stratum");
    let k = law.gain(m);
    match s {
        Stratum::InnerShellCap => r.dot(&u),
        Stratum::OuterShellExit => -r.dot(&u),
        Stratum::AvoidInnerShell | Stratum::AvoidOuterShell => {
            let scale = k * r.norm() * law.axis(m).norm();
            ZERO_TOL * scale - r.dot(&u).abs()
        }
        Stratum::AvoidCone => {
            let v = law.axis(m);
            let n = pi_theta_apply(v, p.psi(), &r).expect("axis is nonzero");
            n.dot(&u) + ZERO_TOL * k * r.norm_sq() * v.norm()
        }
        Stratum::AvoidCapExit => -(x - &c.scale(p.mu())).dot(&u),
    }
}

/// Samples up to `count` points of one stratum per applicable mode.
pub fn check_boundary_stratum(law: &ControlLaw, stratum: Stratum, count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new(format!("boundary_flow/{stratum:?}"), law.dim(), Some(seed));
    let mut rng = rng(seed);
    for &m in stratum.modes() {
        let mut accepted = 0;
        for _ in 0..20 * count.max(1) {
            if accepted == count {
                break;
            }
            if let Some(x) = draw(law, stratum, m, &mut rng) {
                accepted += 1;
                let g = margin(law, stratum, m, &x);
                report.record(&x, g, || format!("{stratum:?}, mode {m}"));
            }
        }
        if accepted == 0 {
            report.note(format!("empty stratum: {stratum:?} in mode {m}"));
        }
    }
    report
}

/// All boundary strata, folded into one report. Strata that yield no
/// samples are noted, not failed.
pub fn check_boundary_flow(law: &ControlLaw, count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("boundary_flow", law.dim(), Some(seed));
    for (i, s) in Stratum::ALL.into_iter().enumerate() {
        report.absorb(check_boundary_stratum(law, s, count, seed.wrapping_add(i as u64)));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, RawParams};

    fn law() -> ControlLaw {
        ControlLaw::new(validate(RawParams::reference_3d()).unwrap())
    }

    #[test]
    fn each_stratum_is_populated_and_holds() {
        let law = law();
        for s in Stratum::ALL {
            let r = check_boundary_stratum(&law, s, 500, 11);
            assert!(r.passed, "{s:?}: {:?}", r.failures.first());
            assert!(r.notes.is_empty(), "{s:?}: {:?}", r.notes);
            assert_eq!(r.samples_tested, 500 * s.modes().len());
        }
    }

    #[test]
    fn cap_exit_points_lie_on_the_mu_sphere() {
        let law = law();
        let p = law.params();
        let mut rng = rng(5);
        let mc = p.center().scale(p.mu());
        let mut n = 0;
        for _ in 0..500 {
            if let Some(x) = draw(&law, Stratum::AvoidCapExit, Mode::AvoidPlus, &mut rng) {
                n += 1;
                assert!((x.dist(&mc) - mc.norm()).abs() < 1e-12);
                let d = x.dist(p.center());
                assert!(d >= p.epsilon() - 1e-12 && d <= p.eps_h() + 1e-12);
            }
        }
        assert!(n > 100);
    }

    #[test]
    fn wrong_sign_is_reported() {
        // gain sign flipped: the stabilizing field now points away from the origin
        let mut raw = RawParams::reference_3d();
        raw.gains.stabilize = -1.0;
        let law = ControlLaw::new(crate::params::ValidatedParams::new_unchecked(raw).unwrap());
        let r = check_boundary_stratum(&law, Stratum::InnerShellCap, 200, 1);
        assert!(!r.passed);
        assert_eq!(r.failure_count, r.samples_tested);
    }
}
