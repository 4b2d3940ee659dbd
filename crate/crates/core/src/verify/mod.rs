//! Numerical checks of the controller's structural properties.
//!
//! Every check returns a [`PropertyReport`]. Margins follow one convention
//! throughout: a sample passes when its margin is positive, and the report
//! keeps the smallest margin seen.

mod audit;
mod boundary;
mod lemmas;
pub mod sampling;
pub mod suites;

use serde::Serialize;
use thiserror::Error;

use crate::controller::{ControlLaw, Mode};
use crate::geometry::VecN;
use crate::sim::HybridTrajectory;

pub use audit::{audit_trajectory, radius_drift, AuditConfig, TrajectoryAudit};
pub use boundary::{check_boundary_flow, check_boundary_stratum, Stratum};
pub use lemmas::{
    check_cone_disjointness, check_jump_cover, check_lemma1, check_lemma3, check_lemma4,
    check_operator_identities,
};

/// Witnesses kept per report; the total count is tracked separately.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("trajectory has dimension {got}, parameters have {expected}")]
    MismatchedParams { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: VecN,
    pub margin: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub seed: Option<u64>,
    pub dim: usize,
    pub samples_tested: usize,
    pub failure_count: usize,
    pub failures: Vec<Witness>,
    pub worst_margin: f64,
    pub passed: bool,
    /// Non-failing remarks, such as strata that produced no samples.
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, dim: usize, seed: Option<u64>) -> Self {
        PropertyReport {
            name: name.into(),
            seed,
            dim,
            samples_tested: 0,
            failure_count: 0,
            failures: Vec::new(),
            worst_margin: f64::INFINITY,
            passed: true,
            notes: Vec::new(),
        }
    }

    /// Records one sample. `margin > 0` passes; NaN fails.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn record(&mut self, x: &VecN, margin: f64, note: impl FnOnce() -> String) {
        self.samples_tested += 1;
        if margin.is_nan() || margin < self.worst_margin {
            self.worst_margin = margin;
        }
        if !(margin > 0.0) {
            self.failure_count += 1;
            self.passed = false;
            if self.failures.len() < MAX_WITNESSES {
                self.failures.push(Witness { x: x.clone(), margin, note: note() });
            }
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    /// Folds `other` into `self` under `self`'s name.
    pub fn absorb(&mut self, other: PropertyReport) {
        self.samples_tested += other.samples_tested;
        self.failure_count += other.failure_count;
        if other.worst_margin.is_nan() || other.worst_margin < self.worst_margin {
            self.worst_margin = other.worst_margin;
        }
        self.passed &= other.passed;
        let room = MAX_WITNESSES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
        self.notes.extend(other.notes);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub j: usize,
    pub m: Mode,
    pub v: f64,
}

/// `V(x, m) = m²/2 + ‖x - p_m‖²/2` with `p₀ = 0`.
pub fn lyapunov(law: &ControlLaw, x: &VecN, m: Mode) -> f64 {
    let mm = f64::from(m.as_i8());
    0.5 * mm * mm + 0.5 * x.dist(&law.attractor(m)).powi(2)
}

/// `⟨∇V(x, m), κ(x, m)⟩`: `-k₀‖x‖²` or `-k_m‖π⊥(x-c)(x-p_m)‖²`.
pub fn lyapunov_rate(law: &ControlLaw, x: &VecN, m: Mode) -> f64 {
    match law.kappa(x, m) {
        Ok(u) => (x - &law.attractor(m)).dot(&u),
        Err(_) => f64::NAN,
    }
}

pub fn lyapunov_series(traj: &HybridTrajectory, law: &ControlLaw) -> Vec<LyapunovSample> {
    traj.samples()
        .map(|(t, j, m, x)| LyapunovSample { t, j, m, v: lyapunov(law, x, m) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, RawParams};

    fn law() -> ControlLaw {
        ControlLaw::new(validate(RawParams::reference_3d()).unwrap())
    }

    #[test]
    fn lyapunov_at_attractors() {
        let law = law();
        assert_eq!(lyapunov(&law, &VecN::zeros(3), Mode::Stabilize), 0.0);
        let p1 = law.params().p1().clone();
        assert_eq!(lyapunov(&law, &p1, Mode::AvoidPlus), 0.5);
        let pm = law.params().p_minus1().clone();
        assert_eq!(lyapunov(&law, &pm, Mode::AvoidMinus), 0.5);
    }

    #[test]
    fn lyapunov_rate_matches_closed_forms() {
        let law = law();
        let x = VecN::from_slice(&[0.3, -2.0, 1.1]).unwrap();
        assert!((lyapunov_rate(&law, &x, Mode::Stabilize) + x.norm_sq()).abs() < 1e-14);
        let u = law.kappa(&x, Mode::AvoidPlus).unwrap();
        assert!((lyapunov_rate(&law, &x, Mode::AvoidPlus) + u.norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn report_bookkeeping() {
        let x = VecN::zeros(2);
        let mut r = PropertyReport::new("p", 2, Some(7));
        r.record(&x, 0.5, String::new);
        assert!(r.passed && r.failures.is_empty());
        for _ in 0..(MAX_WITNESSES + 3) {
            r.record(&x, -1.0, || "bad".into());
        }
        assert!(!r.passed);
        assert_eq!(r.failure_count, MAX_WITNESSES + 3);
        assert_eq!(r.failures.len(), MAX_WITNESSES);
        assert_eq!(r.worst_margin, -1.0);
        r.record(&x, f64::NAN, String::new);
        assert!(r.worst_margin.is_nan());
    }
}
