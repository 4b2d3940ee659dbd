use serde::Serialize;

use super::{lyapunov, lyapunov_rate, PropertyReport, VerifyError};
use crate::controller::ControlLaw;
use crate::geometry::VecN;
use crate::sim::{FlowArc, HybridTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditConfig {
    /// Samples must satisfy `‖x - c‖ >= ε (1 - safety_rel_tol)`.
    pub safety_rel_tol: f64,
    pub max_jumps: usize,
    /// Allowed per-step increase of `V` along a flow arc.
    pub v_step_tol: f64,
    /// `C` in the avoidance-arc drift bound `C k⁵ h⁴ T ε_h`, with `k` the
    /// mode's gain and `T` the arc duration. The reference scene measures
    /// `C ≈ 0.15`.
    pub drift_constant: f64,
    /// Absolute allowance for round-off in the drift bound, relative to
    /// `max(1, ‖c‖)`.
    pub drift_floor: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            safety_rel_tol: 1e-6,
            max_jumps: 3,
            v_step_tol: 1e-9,
            drift_constant: 10.0,
            drift_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryAudit {
    pub safety: PropertyReport,
    pub jump_bound: PropertyReport,
    /// Every jump after the first arc is preceded by flow of positive duration.
    pub jump_spacing: PropertyReport,
    pub lyapunov_decrease: PropertyReport,
    /// Finite-difference `ΔV/Δt` against the analytic rate `⟨∇V, κ⟩`.
    pub lyapunov_rate: PropertyReport,
    pub radius_drift: PropertyReport,
}

impl TrajectoryAudit {
    pub fn reports(&self) -> [&PropertyReport; 6] {
        [
            &self.safety,
            &self.jump_bound,
            &self.jump_spacing,
            &self.lyapunov_decrease,
            &self.lyapunov_rate,
            &self.radius_drift,
        ]
    }

    pub fn passed(&self) -> bool {
        self.reports().iter().all(|r| r.passed)
    }
}

/// `max_t ‖x(t) - c‖ - min_t ‖x(t) - c‖` over the samples of one arc.
pub fn radius_drift(arc: &FlowArc, c: &VecN) -> f64 {
    let (lo, hi) = arc.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let d = s.x.dist(c);
        (lo.min(d), hi.max(d))
    });
    if arc.samples.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Post-run checks of one trajectory against the parameters it was
/// produced with.
pub fn audit_trajectory(
    traj: &HybridTrajectory,
    law: &ControlLaw,
    cfg: &AuditConfig,
) -> Result<TrajectoryAudit, VerifyError> {
    let n = law.dim();
    if let Some((_, _, _, x)) = traj.samples().find(|(_, _, _, x)| x.dim() != n) {
        return Err(VerifyError::MismatchedParams { expected: n, got: x.dim() });
    }
    let p = law.params();
    let c = p.center();

    let mut safety = PropertyReport::new("safety", n, None);
    let floor = p.epsilon() * (1.0 - cfg.safety_rel_tol);
    for (t, _, _, x) in traj.samples() {
        safety.record(x, x.dist(c) - floor, || format!("t = {t}: ‖x - c‖ = {}", x.dist(c)));
    }

    let mut jump_bound = PropertyReport::new("jump_bound", n, None);
    let jumps = traj.jump_count();
    let last = traj.final_state().map(|s| s.x).unwrap_or_else(|| VecN::zeros(n));
    jump_bound.record(&last, cfg.max_jumps as f64 + 0.5 - jumps as f64, || format!("{jumps} jumps"));

    let mut jump_spacing = PropertyReport::new("jump_spacing", n, None);
    for arc in traj.arcs.iter().skip(1) {
        if let Some(s) = arc.samples.first() {
            let is_jump = matches!(arc.end, crate::sim::ArcEnd::Jump(_));
            let margin = if is_jump { arc.duration() } else { 1.0 };
            jump_spacing.record(&s.x, margin, || format!("arc j = {} flows for {}", arc.j, arc.duration()));
        }
    }

    let mut decrease = PropertyReport::new("lyapunov_decrease", n, None);
    let mut rate = PropertyReport::new("lyapunov_rate", n, None);
    let mut drift = PropertyReport::new("radius_drift", n, None);
    for arc in &traj.arcs {
        let m = arc.mode;
        let vs: Vec<f64> = arc.samples.iter().map(|s| lyapunov(law, &s.x, m)).collect();
        for (w, s) in vs.windows(2).zip(arc.samples.iter().skip(1)) {
            decrease.record(&s.x, cfg.v_step_tol - (w[1] - w[0]), || {
                format!("t = {}, mode {m}: V rose by {:e}", s.t, w[1] - w[0])
            });
        }
        let duration = arc.duration();
        if duration > 0.0 {
            let (first, last) = (vs[0], vs[vs.len() - 1]);
            let end = &arc.samples[arc.samples.len() - 1].x;
            decrease.record(end, first - 1e-12 * duration - last, || {
                format!("arc j = {}, mode {m}: V {first} -> {last}", arc.j)
            });
        }

        let rates: Vec<f64> = arc.samples.iter().map(|s| lyapunov_rate(law, &s.x, m)).collect();
        let curvature = arc
            .samples
            .windows(2)
            .zip(rates.windows(2))
            .map(|(s, a)| (a[1] - a[0]).abs() / (s[1].t - s[0].t))
            .fold(0.0, f64::max);
        for (k, s) in arc.samples.windows(2).enumerate() {
            let dt = s[1].t - s[0].t;
            let fd = (vs[k + 1] - vs[k]) / dt;
            let err = (fd - rates[k]).abs();
            let bound = 10.0 * dt * curvature + 1e-9 * (1.0 + rates[k].abs());
            rate.record(&s[0].x, bound - err, || {
                format!("t = {}: ΔV/Δt = {fd:e}, ⟨∇V, κ⟩ = {:e}", s[0].t, rates[k])
            });
        }

        if m.is_avoidance() && duration > 0.0 {
            let d = radius_drift(arc, c);
            let k = law.gain(m);
            let bound = cfg.drift_constant * k.powi(5) * traj.h.powi(4) * duration * p.eps_h()
                + cfg.drift_floor * c.norm().max(1.0);
            drift.record(end_point(arc), bound - d, || format!("arc j = {}: drift {d:e} over {duration}", arc.j));
        }
    }

    Ok(TrajectoryAudit {
        safety,
        jump_bound,
        jump_spacing,
        lyapunov_decrease: decrease,
        lyapunov_rate: rate,
        radius_drift: drift,
    })
}

fn end_point(arc: &FlowArc) -> &VecN {
    &arc.samples[arc.samples.len() - 1].x
}
