//! Seeded samplers for spheres, shells, cones and the controller's sets.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controller::{ControlLaw, Mode};
use crate::geometry::{orth_proj_apply, VecN};
use crate::params::{mu_min, theta_max, Gains, ObstacleSpec, RawParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform direction on the unit sphere in `ℝⁿ`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> VecN {
    loop {
        let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let v = VecN::new(e).expect("n >= 2 and finite normal draws");
        let norm = v.norm();
        if norm > 1e-8 {
            return v.scale(1.0 / norm);
        }
    }
}

/// Uniform unit vector orthogonal to `axis`.
pub fn unit_vector_orthogonal<R: Rng + ?Sized>(rng: &mut R, axis: &VecN) -> VecN {
    loop {
        let w = orth_proj_apply(axis, &unit_vector(rng, axis.dim())).expect("axis is nonzero");
        if w.norm() > 1e-6 {
            return w.normalized().expect("nonzero");
        }
    }
}

pub fn on_sphere<R: Rng + ?Sized>(rng: &mut R, center: &VecN, radius: f64) -> VecN {
    center.add_scaled(radius, &unit_vector(rng, center.dim()))
}

/// Uniform in the shell `r0 <= ‖x - center‖ <= r1` (volume measure).
pub fn in_shell<R: Rng + ?Sized>(rng: &mut R, center: &VecN, r0: f64, r1: f64) -> VecN {
    let n = center.dim() as i32;
    let u: f64 = rng.random();
    let r = (r0.powi(n) + u * (r1.powi(n) - r0.powi(n))).powf(1.0 / f64::from(n));
    center.add_scaled(r, &unit_vector(rng, center.dim()))
}

/// Unit vector at angle `alpha` from `axis_hat`.
pub fn direction_at_angle<R: Rng + ?Sized>(rng: &mut R, axis_hat: &VecN, alpha: f64) -> VecN {
    let w = unit_vector_orthogonal(rng, axis_hat);
    axis_hat.scale(alpha.cos()).add_scaled(alpha.sin(), &w)
}

fn frac<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, t_lo: f64, t_hi: f64) -> f64 {
    lo + (hi - lo) * rng.random_range(t_lo..t_hi)
}

/// A random parameter set satisfying every feasibility constraint, with each
/// free parameter drawn from the interior of its admissible interval.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RawParams {
    let nc = rng.random_range(0.5..4.0);
    let c = unit_vector(rng, n).scale(nc);
    let eps = nc * rng.random_range(0.15..0.7);
    let obstacle = ObstacleSpec::new(c, eps).expect("ε < ‖c‖");
    let eps_h = frac(rng, eps, (eps * nc).sqrt(), 0.1, 0.9);
    let eps_s = frac(rng, eps, eps_h, 0.1, 0.9);
    let mu_lo = mu_min(&obstacle, eps_h).expect("ε_h feasible");
    let mu = frac(rng, mu_lo, 0.5, 0.1, 0.9);
    let tmax = theta_max(&obstacle, eps_h, mu).expect("μ feasible").min(FRAC_PI_2);
    let theta = frac(rng, 0.0, tmax, 0.1, 0.9);
    let pmax = theta.min(FRAC_PI_2 - theta);
    let psi_bar = frac(rng, 0.0, pmax, 0.2, 0.9);
    let psi = frac(rng, 0.0, psi_bar, 0.2, 0.9);
    let gains = Gains::from_array([
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    ]);
    RawParams { obstacle, eps_s, eps_h, mu, theta, psi, psi_bar, gains, w_hint: None }
}

/// The sets exported as point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SetLabel {
    F0,
    J0,
    F1,
    Fm1,
    J1,
    Jm1,
    Obstacle,
}

impl SetLabel {
    pub const ALL: [SetLabel; 7] =
        [SetLabel::F0, SetLabel::J0, SetLabel::F1, SetLabel::Fm1, SetLabel::J1, SetLabel::Jm1, SetLabel::Obstacle];

    pub fn name(self) -> &'static str {
        match self {
            SetLabel::F0 => "F0",
            SetLabel::J0 => "J0",
            SetLabel::F1 => "F1",
            SetLabel::Fm1 => "Fm1",
            SetLabel::J1 => "J1",
            SetLabel::Jm1 => "Jm1",
            SetLabel::Obstacle => "obstacle",
        }
    }

    pub fn contains(self, law: &ControlLaw, x: &VecN) -> bool {
        match self {
            SetLabel::F0 => law.flow_set_contains(x, Mode::Stabilize, 0.0),
            SetLabel::J0 => law.jump_set_contains(x, Mode::Stabilize, 0.0),
            SetLabel::F1 => law.flow_set_contains(x, Mode::AvoidPlus, 0.0),
            SetLabel::Fm1 => law.flow_set_contains(x, Mode::AvoidMinus, 0.0),
            SetLabel::J1 => law.jump_set_contains(x, Mode::AvoidPlus, 0.0),
            SetLabel::Jm1 => law.jump_set_contains(x, Mode::AvoidMinus, 0.0),
            SetLabel::Obstacle => x.dist(law.params().center()) <= law.params().epsilon(),
        }
    }
}

impl TryFrom<String> for SetLabel {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SetLabel> for String {
    fn from(l: SetLabel) -> String {
        l.name().to_string()
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SetLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SetLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown set {s:?}; expected one of F0, J0, F1, Fm1, J1, Jm1, obstacle"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub label: SetLabel,
    pub points: Vec<VecN>,
    pub attempts: u64,
}

impl PointCloud {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.points.len() as f64 / self.attempts as f64
        }
    }
}

/// Half-width of the sampling box around `c`.
pub fn box_half_width(law: &ControlLaw) -> f64 {
    2.0 * (law.params().eps_h() + law.params().center().norm())
}

/// Rejection-samples `count` points of `label` from the axis-aligned box of
/// half-width [`box_half_width`] centered at `c`, giving up after
/// `max_attempts` draws.
pub fn sample_set(law: &ControlLaw, label: SetLabel, count: usize, max_attempts: u64, seed: u64) -> PointCloud {
    let mut rng = rng(seed);
    let c = law.params().center();
    let w = box_half_width(law);
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0;
    while points.len() < count && attempts < max_attempts {
        attempts += 1;
        let e: Vec<f64> = c.as_slice().iter().map(|ci| ci + rng.random_range(-w..=w)).collect();
        let x = VecN::new(e).expect("finite");
        if label.contains(law, &x) {
            points.push(x);
        }
    }
    PointCloud { label, points, attempts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    #[test]
    fn shell_and_sphere_radii() {
        let mut r = rng(1);
        let c = VecN::from_slice(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        for _ in 0..200 {
            assert!((on_sphere(&mut r, &c, 0.7).dist(&c) - 0.7).abs() < 1e-12);
            let d = in_shell(&mut r, &c, 0.7, 0.8).dist(&c);
            assert!((0.7 - 1e-12..=0.8 + 1e-12).contains(&d));
        }
    }

    #[test]
    fn direction_at_angle_is_exact() {
        let mut r = rng(2);
        let a = unit_vector(&mut r, 5);
        for _ in 0..50 {
            let d = direction_at_angle(&mut r, &a, 0.3);
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!((a.dot(&d).acos() - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn random_params_always_validate() {
        let mut r = rng(3);
        for n in 2..=6 {
            for _ in 0..40 {
                let raw = random_params(&mut r, n);
                assert!(validate(raw.clone()).is_ok(), "{raw:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(unit_vector(&mut rng(9), 3), unit_vector(&mut rng(9), 3));
    }

    #[test]
    fn labels_parse() {
        assert_eq!("Fm1".parse::<SetLabel>().unwrap(), SetLabel::Fm1);
        assert_eq!("OBSTACLE".parse::<SetLabel>().unwrap(), SetLabel::Obstacle);
        assert!("F2".parse::<SetLabel>().is_err());
    }

    #[test]
    fn j0_cloud_respects_shell() {
        let law = ControlLaw::new(validate(RawParams::reference_3d()).unwrap());
        let cloud = sample_set(&law, SetLabel::J0, 300, 10_000_000, 5);
        assert_eq!(cloud.points.len(), 300);
        assert!(cloud.acceptance_rate() > 1e-5);
        let c = law.params().center();
        for x in &cloud.points {
            let d = x.dist(c);
            assert!((0.7..=0.8).contains(&d));
        }
    }
}
