use std::f64::consts::PI;

use rand::Rng;

use super::sampling::{direction_at_angle, in_shell, on_sphere, rng, unit_vector, unit_vector_orthogonal};
use super::{PropertyReport, VerifyError};
use crate::controller::{ControlLaw, Mode};
use crate::geometry::{
    dist_to_line, geodesic_dist, orth_proj_apply, par_proj_apply, reflect_apply, VecN,
};
use crate::sim::membership_tol;

const IDENTITY_TOL: f64 = 1e-12;

/// Runs the projection/reflection identity battery on `count` random pairs
/// `(z, x)` in `ℝⁿ`. Each identity is applied to `x` and compared entrywise.
pub fn check_operator_identities(n: usize, count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("operator_identities", n, Some(seed));
    let mut rng = rng(seed);
    for _ in 0..count {
        let z = unit_vector(&mut rng, n).scale(10f64.powf(rng.random_range(-1.0..1.0)));
        let x = unit_vector(&mut rng, n).scale(10f64.powf(rng.random_range(-1.0..1.0)));
        let par = |y: &VecN| par_proj_apply(&z, y).expect("z nonzero");
        let orth = |y: &VecN| orth_proj_apply(&z, y).expect("z nonzero");
        let refl = |y: &VecN| reflect_apply(&z, y).expect("z nonzero");
        let zero = VecN::zeros(n);
        let x_scale = x.norm().max(1.0);
        let z_scale = z.norm().max(1.0);
        let checks: [(&str, VecN, &VecN, f64); 12] = [
            ("π∥(z)z = z", par(&z), &z, z_scale),
            ("π⊥(z)z = 0", orth(&z), &zero, z_scale),
            ("ρ⊥(z)z = -z", refl(&z), &z.scale(-1.0), z_scale),
            ("π⊥π⊥ = π⊥", orth(&orth(&x)), &orth(&x), x_scale),
            ("π∥π∥ = π∥", par(&par(&x)), &par(&x), x_scale),
            ("ρ⊥ρ⊥ = I", refl(&refl(&x)), &x, x_scale),
            ("π⊥π∥ = 0", orth(&par(&x)), &zero, x_scale),
            ("π⊥ + π∥ = I", &orth(&x) + &par(&x), &x, x_scale),
            ("2π⊥ - ρ⊥ = I", &orth(&x).scale(2.0) - &refl(&x), &x, x_scale),
            ("π∥ρ⊥ = -π∥", par(&refl(&x)), &par(&x).scale(-1.0), x_scale),
            ("π⊥ρ⊥ = π⊥", orth(&refl(&x)), &orth(&x), x_scale),
            ("2π∥ + ρ⊥ = I", &par(&x).scale(2.0) + &refl(&x), &x, x_scale),
        ];
        for (name, lhs, rhs, scale) in checks {
            let err = lhs.max_abs_diff(rhs);
            report.record(&x, IDENTITY_TOL * scale - err, || format!("{name}: error {err:e}"));
        }
    }
    report
}

fn angle_to_line(y: &VecN, axis: &VecN) -> f64 {
    (y.dot(axis) / (y.norm() * axis.norm())).abs().min(1.0).acos()
}

/// Samples both double cones `C^≤(c, v₁, ψ₁)` and `C^≤(c, v₂, ψ₂)` and
/// records, for every sample, how far it is from lying in both. Includes
/// in-plane probes along the cone rims and the axis bisectors, where an
/// overlap first appears.
///
/// No hypothesis is checked; see [`check_lemma1`].
pub fn check_cone_disjointness(
    c: &VecN,
    v1: &VecN,
    v2: &VecN,
    psi1: f64,
    psi2: f64,
    count: usize,
    seed: u64,
) -> Result<PropertyReport, VerifyError> {
    let n = c.dim();
    for v in [v1, v2] {
        if v.dim() != n || v.is_zero() {
            return Err(VerifyError::PreconditionViolated("cone axes must be nonzero vectors in ℝⁿ".into()));
        }
    }
    let (a1, a2) = (v1.normalized().expect("nonzero"), v2.normalized().expect("nonzero"));
    let scale = c.norm().max(1.0);
    let margin = |x: &VecN| {
        let y = x - c;
        (angle_to_line(&y, &a1) - psi1).max(angle_to_line(&y, &a2) - psi2)
    };
    let mut report = PropertyReport::new("lemma1_cone_disjointness", n, Some(seed));
    let mut rng = rng(seed);
    for (axis, psi) in [(&a1, psi1), (&a2, psi2)] {
        for i in 0..count {
            let alpha = if i % 4 == 0 { psi } else { rng.random_range(0.0..=psi) };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let r = scale * rng.random_range(1e-3..2.0);
            let x = c.add_scaled(sign * r, &direction_at_angle(&mut rng, axis, alpha));
            report.record(&x, margin(&x), || format!("α = {alpha}"));
        }
    }
    if let Ok(w) = orth_proj_apply(&a1, &a2).and_then(|w| w.normalized()) {
        let in_plane = |ang: f64| a1.scale(ang.cos()).add_scaled(ang.sin(), &w);
        let gap = a1.dot(&a2).clamp(-1.0, 1.0).acos();
        let probes = [psi1, gap - psi2, 0.5 * gap, 0.5 * (gap + PI), PI - psi1, gap + psi2 - PI];
        for ang in probes {
            let x = c.add_scaled(scale, &in_plane(ang));
            report.record(&x, margin(&x), || format!("in-plane probe at {ang} rad from v₁"));
        }
    }
    Ok(report)
}

/// Cone disjointness under its hypothesis
/// `ψ₁ + ψ₂ < ∠(v₁, v₂) < π - (ψ₁ + ψ₂)`.
pub fn check_lemma1(
    c: &VecN,
    v1: &VecN,
    v2: &VecN,
    psi1: f64,
    psi2: f64,
    count: usize,
    seed: u64,
) -> Result<PropertyReport, VerifyError> {
    let unit = |v: &VecN| {
        v.normalized()
            .map_err(|e| VerifyError::PreconditionViolated(format!("cone axis: {e}")))
    };
    let (u1, u2) = (unit(v1)?, unit(v2)?);
    let gap = geodesic_dist(&u1, &u2).map_err(|e| VerifyError::PreconditionViolated(e.to_string()))?;
    let sum = psi1 + psi2;
    if !(psi1 > 0.0 && psi2 > 0.0 && sum < gap && gap < PI - sum) {
        return Err(VerifyError::PreconditionViolated(format!(
            "need 0 < ψ₁, ψ₂ and ψ₁ + ψ₂ < ∠(v₁, v₂) < π - (ψ₁ + ψ₂); got ψ₁ = {psi1}, ψ₂ = {psi2}, angle = {gap}"
        )));
    }
    check_cone_disjointness(c, v1, v2, psi1, psi2, count, seed)
}

/// The avoidance field vanishes exactly on the axis line `L(c, p_m - c)`.
///
/// On the line `‖κ‖` must be round-off small. Off the line (distance at
/// least `1e-3`) it must match `k_m ‖p_m - c‖ dist(x, L) / ‖x - c‖`.
pub fn check_lemma3(law: &ControlLaw, count: usize, seed: u64) -> PropertyReport {
    let p = law.params();
    let c = p.center();
    let mut report = PropertyReport::new("lemma3_axis_equilibria", law.dim(), Some(seed));
    let mut rng = rng(seed);
    let reach = 3.0 * (p.eps_h() + c.norm());
    for m in Mode::AVOIDANCE {
        let v = law.axis(m);
        let vhat = v.normalized().expect("axis is nonzero");
        let k = law.gain(m);
        for _ in 0..count {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let t = sign * reach * rng.random_range(1e-4..1.0);
            let x = c.add_scaled(t, &vhat);
            let u = law.kappa(&x, m).expect("x != c");
            let scale = k * (t.abs() + v.norm());
            let err = u.norm();
            report.record(&x, 1e-10 * scale - err, || format!("mode {m}: on-line ‖κ‖ = {err:e}"));
        }
        for i in 0..count {
            let x = if i % 2 == 0 {
                c.add_scaled(reach * rng.random_range(1e-3..1.0), &unit_vector(&mut rng, c.dim()))
            } else {
                let t = reach * rng.random_range(-1.0..1.0);
                let delta = 10f64.powf(rng.random_range(-3.0..0.0));
                c.add_scaled(t, &vhat).add_scaled(delta, &unit_vector_orthogonal(&mut rng, &vhat))
            };
            let dist = dist_to_line(c, v, &x).expect("dims agree");
            if dist < 1e-3 {
                continue;
            }
            let u = law.kappa(&x, m).expect("x != c");
            let expected = k * v.norm() * dist / x.dist(c);
            let err = (u.norm() - expected).abs();
            report.record(&x, 1e-9 * expected - err, || {
                format!("mode {m}: ‖κ‖ = {:e}, expected {expected:e}", u.norm())
            });
        }
    }
    report
}

/// No point of the axis line within `2ε_h` of `c` belongs to `F_m`.
pub fn check_lemma4(law: &ControlLaw, count: usize, seed: u64) -> PropertyReport {
    let p = law.params();
    let c = p.center();
    let (eps, eps_h) = (p.epsilon(), p.eps_h());
    let mut report = PropertyReport::new("lemma4_axis_outside_flow_set", law.dim(), Some(seed));
    let mut rng = rng(seed);
    let fixed = [0.0, eps, -eps, eps_h, -eps_h, 0.5 * (eps + eps_h), -0.5 * (eps + eps_h)];
    for m in Mode::AVOIDANCE {
        let vhat = law.axis(m).normalized().expect("axis is nonzero");
        let ts = fixed
            .into_iter()
            .chain((0..count).map(|_| rng.random_range(-2.0 * eps_h..=2.0 * eps_h)));
        for t in ts {
            let x = c.add_scaled(t, &vhat);
            let margin = law.flow_margin(&x, m);
            report.record(&x, margin, || format!("mode {m}: axis point at t = {t}"));
        }
    }
    report
}

/// Every point of `J₀` has a jump target, and the post-jump state lies in
/// the target's flow set but not in its jump set.
pub fn check_jump_cover(law: &ControlLaw, count: usize, seed: u64) -> PropertyReport {
    let p = law.params();
    let c = p.center();
    let (eps, eps_s) = (p.epsilon(), p.eps_s());
    let tol = membership_tol(law);
    let mut report = PropertyReport::new("jump_cover_and_hysteresis", law.dim(), Some(seed));
    let mut rng = rng(seed);
    let budget = 50 * count.max(1);
    let mut accepted = 0;
    for i in 0..budget {
        if accepted == count {
            break;
        }
        let x = match i % 8 {
            0 => on_sphere(&mut rng, c, eps),
            1 => on_sphere(&mut rng, c, eps_s),
            _ => in_shell(&mut rng, c, eps, eps_s),
        };
        if !law.jump_set_contains(&x, Mode::Stabilize, 0.0) {
            continue;
        }
        accepted += 1;
        match law.jump_select(&x, Mode::Stabilize, tol) {
            Err(_) => {
                let clearance = Mode::AVOIDANCE
                    .into_iter()
                    .map(|m| law.axis_line_angle(&x, m) - p.psi_bar())
                    .fold(f64::NEG_INFINITY, f64::max);
                report.record(&x, clearance, || "no avoidance mode admits this point".into());
            }
            Ok(target) => {
                let m = target.mode;
                let in_flow = tol - law.flow_margin(&x, m);
                let out_of_jump = law.jump_margin(&x, m) - tol;
                report.record(&x, in_flow.min(out_of_jump), || {
                    format!("target {m}: flow margin {:e}, jump margin {:e}", law.flow_margin(&x, m), law.jump_margin(&x, m))
                });
            }
        }
    }
    if accepted == 0 {
        report.note("no samples of J₀ found");
    }
    report
}
