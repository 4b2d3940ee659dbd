//! Closed-loop simulation on hybrid time domains.
//!
//! Flow uses fixed-step classical RK4 with the mode frozen. After every
//! step the jump margin is probed at a few intermediate times (each probe
//! is an RK4 step of reduced length from the step start) and the earliest
//! bracketed crossing is refined by bisection. On the shared boundary of a
//! flow set and a jump set the simulator jumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControlError, ControlLaw, Mode};
use crate::geometry::{GeometryError, VecN};

/// Number of interior probes per step used to bracket the earliest crossing.
const EVENT_PROBES: usize = 4;
const MAX_BISECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial state is inside the obstacle (‖x0 - c‖ = {dist} < ε = {epsilon})")]
    UnsafeStart { dist: f64, epsilon: f64 },
    #[error("state {x:?} in mode {mode} is in neither the flow set nor the jump set (t = {t})")]
    NumericalStall { t: f64, mode: Mode, x: VecN },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Step size (s).
    pub h: f64,
    pub t_max: f64,
    /// Terminate once `‖x‖ <= goal_tol`.
    pub goal_tol: f64,
    /// Bisection stops once the located point is within this margin of the
    /// jump-set boundary.
    pub event_tol: f64,
    pub max_jumps_hard: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { h: 1e-3, t_max: 50.0, goal_tol: 1e-3, event_tol: 1e-12, max_jumps_hard: 10 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!("{name} must be positive and finite (got {v})")))
            }
        };
        positive("h", self.h)?;
        positive("t_max", self.t_max)?;
        positive("goal_tol", self.goal_tol)?;
        positive("event_tol", self.event_tol)?;
        Ok(())
    }
}

/// Membership tolerance for event tests, scaled by the scene size.
pub fn membership_tol(law: &ControlLaw) -> f64 {
    1e-7 * law.params().center().norm().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub x: VecN,
    pub m: Mode,
    pub t: f64,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: VecN,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpEvent {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
    pub x: VecN,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    GoalReached,
    TimeLimit,
    /// The hard jump guard fired; always an anomaly.
    JumpLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcEnd {
    Jump(JumpEvent),
    Terminal(TerminalReason),
}

/// A maximal interval of flow in one mode; samples include both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowArc {
    pub mode: Mode,
    pub j: usize,
    pub samples: Vec<Sample>,
    pub end: ArcEnd,
}

impl FlowArc {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridTrajectory {
    pub h: f64,
    pub arcs: Vec<FlowArc>,
}

impl HybridTrajectory {
    pub fn jumps(&self) -> impl Iterator<Item = &JumpEvent> {
        self.arcs.iter().filter_map(|a| match &a.end {
            ArcEnd::Jump(e) => Some(e),
            ArcEnd::Terminal(_) => None,
        })
    }

    pub fn jump_count(&self) -> usize {
        self.jumps().count()
    }

    pub fn ambiguity_count(&self) -> usize {
        self.jumps().filter(|e| e.ambiguous).count()
    }

    pub fn terminal_reason(&self) -> Option<TerminalReason> {
        match self.arcs.last().map(|a| &a.end) {
            Some(ArcEnd::Terminal(r)) => Some(*r),
            _ => None,
        }
    }

    /// Every sample as `(t, j, m, x)`, arcs in order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, usize, Mode, &VecN)> {
        self.arcs
            .iter()
            .flat_map(|a| a.samples.iter().map(move |s| (s.t, a.j, a.mode, &s.x)))
    }

    pub fn final_state(&self) -> Option<HybridState> {
        let arc = self.arcs.last()?;
        let s = arc.samples.last()?;
        Some(HybridState { x: s.x.clone(), m: arc.mode, t: s.t, j: arc.j })
    }

    pub fn min_dist_to(&self, c: &VecN) -> f64 {
        self.samples().map(|(_, _, _, x)| x.dist(c)).fold(f64::INFINITY, f64::min)
    }

    /// Time at which the goal tolerance was reached, if it was.
    pub fn t_converge(&self) -> Option<f64> {
        match self.terminal_reason() {
            Some(TerminalReason::GoalReached) => self.final_state().map(|s| s.t),
            _ => None,
        }
    }
}

/// One classical RK4 step of `ẋ = κ(x, m)` with `m` frozen.
pub fn rk4_flow_step(law: &ControlLaw, x: &VecN, m: Mode, h: f64) -> Result<VecN, SimError> {
    let k1 = law.kappa(x, m)?;
    let k2 = law.kappa(&x.add_scaled(0.5 * h, &k1), m)?;
    let k3 = law.kappa(&x.add_scaled(0.5 * h, &k2), m)?;
    let k4 = law.kappa(&x.add_scaled(h, &k3), m)?;
    Ok(x
        .add_scaled(h / 6.0, &k1)
        .add_scaled(h / 3.0, &k2)
        .add_scaled(h / 3.0, &k3)
        .add_scaled(h / 6.0, &k4))
}

/// A located jump-set crossing within one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Elapsed time from the step start.
    pub tau: f64,
    pub x: VecN,
}

/// Outcome of probing one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Event(Event),
    /// No crossing; carries the full-step endpoint.
    NoEvent(VecN),
}

/// Finds the earliest entry into the jump set of `m` over a step of length
/// `h` starting at `x`. A start already within `tol` of the jump set is an
/// immediate event (`tau = 0`).
pub fn locate_event(
    law: &ControlLaw,
    x: &VecN,
    m: Mode,
    h: f64,
    tol: f64,
    event_tol: f64,
) -> Result<StepOutcome, SimError> {
    let g = |y: &VecN| law.jump_margin(y, m);
    if g(x) <= tol {
        return Ok(StepOutcome::Event(Event { tau: 0.0, x: x.clone() }));
    }
    let mut lo = 0.0;
    let mut end = None;
    for i in 1..=EVENT_PROBES {
        let tau = h * i as f64 / EVENT_PROBES as f64;
        let y = rk4_flow_step(law, x, m, tau)?;
        let gy = g(&y);
        if gy.is_nan() {
            return Err(SimError::NumericalStall { t: tau, mode: m, x: y });
        }
        if gy <= tol {
            end = Some((tau, y));
            break;
        }
        lo = tau;
        if i == EVENT_PROBES {
            return Ok(StepOutcome::NoEvent(y));
        }
    }
    let (mut hi, mut x_hi) = end.expect("loop either breaks with a bracket or returns");
    // refine towards the exact boundary when the bracket end is past it
    let level = if g(&x_hi) <= 0.0 { 0.0 } else { tol };
    for _ in 0..MAX_BISECTIONS {
        if g(&x_hi) >= level - event_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y = rk4_flow_step(law, x, m, mid)?;
        if g(&y) <= level {
            hi = mid;
            x_hi = y;
        } else {
            lo = mid;
        }
    }
    Ok(StepOutcome::Event(Event { tau: hi, x: x_hi }))
}

/// Simulates one solution from `(x0, m0)`.
pub fn simulate(law: &ControlLaw, x0: &VecN, m0: Mode, cfg: &SimConfig) -> Result<HybridTrajectory, SimError> {
    cfg.validate()?;
    x0.check_dim(law.dim())?;
    let p = law.params();
    let dist = x0.dist(p.center());
    if dist < p.epsilon() {
        return Err(SimError::UnsafeStart { dist, epsilon: p.epsilon() });
    }
    let tol = membership_tol(law);

    let mut arcs = Vec::new();
    let (mut x, mut m, mut t, mut j) = (x0.clone(), m0, 0.0_f64, 0_usize);

    loop {
        let t0 = t;
        let mut samples = vec![Sample { t, x: x.clone() }];
        let end = 'arc: {
            if x.norm() <= cfg.goal_tol {
                break 'arc ArcEnd::Terminal(TerminalReason::GoalReached);
            }
            if j >= cfg.max_jumps_hard {
                break 'arc ArcEnd::Terminal(TerminalReason::JumpLimit);
            }
            if !law.jump_set_contains(&x, m, tol) && !law.flow_set_contains(&x, m, tol) {
                return Err(SimError::NumericalStall { t, mode: m, x });
            }
            let mut steps = 0_u64;
            loop {
                if law.jump_set_contains(&x, m, tol) {
                    let target = law.jump_select(&x, m, tol)?;
                    break 'arc ArcEnd::Jump(JumpEvent {
                        t,
                        from: m,
                        to: target.mode,
                        x: x.clone(),
                        ambiguous: target.ambiguous,
                    });
                }
                if t >= cfg.t_max {
                    break 'arc ArcEnd::Terminal(TerminalReason::TimeLimit);
                }
                match locate_event(law, &x, m, cfg.h, tol, cfg.event_tol)? {
                    StepOutcome::NoEvent(y) => {
                        steps += 1;
                        t = t0 + steps as f64 * cfg.h;
                        x = y;
                    }
                    StepOutcome::Event(ev) => {
                        if ev.tau <= 0.0 {
                            return Err(SimError::NumericalStall { t, mode: m, x });
                        }
                        t = t0 + steps as f64 * cfg.h + ev.tau;
                        x = ev.x;
                    }
                }
                samples.push(Sample { t, x: x.clone() });
                if x.norm() <= cfg.goal_tol {
                    break 'arc ArcEnd::Terminal(TerminalReason::GoalReached);
                }
            }
        };
        let next = match &end {
            ArcEnd::Jump(ev) => Some(ev.to),
            ArcEnd::Terminal(_) => None,
        };
        arcs.push(FlowArc { mode: m, j, samples, end });
        match next {
            Some(to) => {
                m = to;
                j += 1;
            }
            None => break,
        }
    }
    Ok(HybridTrajectory { h: cfg.h, arcs })
}

/// Runs independent simulations, preserving input order. Errors are
/// collected per run.
pub fn batch_simulate(
    law: &ControlLaw,
    inits: &[(VecN, Mode)],
    cfg: &SimConfig,
    parallel: bool,
) -> Vec<Result<HybridTrajectory, SimError>> {
    if parallel {
        inits.par_iter().map(|(x0, m0)| simulate(law, x0, *m0, cfg)).collect()
    } else {
        inits.iter().map(|(x0, m0)| simulate(law, x0, *m0, cfg)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, RawParams};

    fn law() -> ControlLaw {
        ControlLaw::new(validate(RawParams::reference_3d()).unwrap())
    }

    fn v(e: &[f64]) -> VecN {
        VecN::from_slice(e).unwrap()
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let law = law();
        // ẋ = -x; RK4 local error is O(h⁵)
        let x1 = rk4_flow_step(&law, &v(&[1., 0., 0.]), Mode::Stabilize, 0.1).unwrap();
        assert!((x1[0] - 0.9048374180359595).abs() <= 1e-7);
        assert_eq!(x1[1], 0.0);
    }

    #[test]
    fn rk4_fixed_point_on_axis_line() {
        let law = law();
        let c = law.params().center();
        let x = c.add_scaled(-0.8, &law.axis(Mode::AvoidPlus).normalized().unwrap());
        let y = rk4_flow_step(&law, &x, Mode::AvoidPlus, 0.05).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn rk4_avoidance_radius_drift_is_small() {
        let law = law();
        let c = law.params().center();
        let x = c.add_scaled(0.8, &v(&[0.2, 1.0, -0.4]).normalized().unwrap());
        let h = 0.01;
        let y = rk4_flow_step(&law, &x, Mode::AvoidMinus, h).unwrap();
        assert!((y.dist(c) - x.dist(c)).abs() < 1e-9);
        assert!(y.max_abs_diff(&x) > 1e-4);
    }

    #[test]
    fn event_on_outer_shell_head_on() {
        let law = law();
        let p = law.params();
        let c = p.center();
        let chat = c.normalized().unwrap();
        // x(t) = x0 e^{-t} along ĉ; ‖x(t) - c‖ = ε_s at |x| = ‖c‖ + ε_s
        let x0 = chat.scale(p.center().norm() + p.eps_s() + 0.002);
        let tol = membership_tol(&law);
        let out = locate_event(&law, &x0, Mode::Stabilize, 0.01, tol, 1e-12).unwrap();
        let StepOutcome::Event(ev) = out else { panic!("expected an event") };
        assert!((ev.x.dist(c) - p.eps_s()).abs() < 1e-9);
        let expected_tau = (x0.norm() / (c.norm() + p.eps_s())).ln();
        assert!((ev.tau - expected_tau).abs() < 1e-8);
    }

    #[test]
    fn no_event_far_away_and_immediate_event_on_boundary() {
        let law = law();
        let p = law.params();
        let c = p.center();
        let x0 = c.scale(-2.0 / c.norm());
        let tol = membership_tol(&law);
        assert!(matches!(
            locate_event(&law, &x0, Mode::Stabilize, 0.01, tol, 1e-12).unwrap(),
            StepOutcome::NoEvent(_)
        ));
        let x = c.add_scaled(p.eps_s(), &c.normalized().unwrap());
        let StepOutcome::Event(ev) = locate_event(&law, &x, Mode::Stabilize, 0.01, tol, 1e-12).unwrap()
        else {
            panic!()
        };
        assert_eq!(ev.tau, 0.0);
    }

    #[test]
    fn unsafe_start_rejected() {
        let law = law();
        let c = law.params().center().clone();
        let r = simulate(&law, &c, Mode::Stabilize, &SimConfig::default());
        assert!(matches!(r, Err(SimError::UnsafeStart { .. })));
    }

    #[test]
    fn config_validation() {
        let law = law();
        let cfg = SimConfig { h: 0.0, ..SimConfig::default() };
        let r = simulate(&law, &v(&[3., 3., 3.]), Mode::Stabilize, &cfg);
        assert!(matches!(r, Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn clear_start_converges_without_jumps() {
        let law = law();
        let c = law.params().center();
        let x0 = c.scale(-2.0 / c.norm());
        let traj = simulate(&law, &x0, Mode::Stabilize, &SimConfig::default()).unwrap();
        assert_eq!(traj.jump_count(), 0);
        assert_eq!(traj.terminal_reason(), Some(TerminalReason::GoalReached));
        assert!(traj.final_state().unwrap().x.norm() <= 1e-3);
        // t steps by exactly h within the arc
        let s = &traj.arcs[0].samples;
        assert!((s[10].t - 10.0 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn obstacle_in_the_way_takes_two_jumps() {
        let law = law();
        let c = law.params().center();
        let x0 = c.scale(3.0 / c.norm());
        let traj = simulate(&law, &x0, Mode::Stabilize, &SimConfig::default()).unwrap();
        let modes: Vec<_> = traj.jumps().map(|e| (e.from, e.to)).collect();
        assert_eq!(modes.len(), 2, "{modes:?}");
        assert_eq!(modes[0].0, Mode::Stabilize);
        assert!(modes[0].1.is_avoidance());
        assert_eq!(modes[1], (modes[0].1, Mode::Stabilize));
        assert_eq!(traj.terminal_reason(), Some(TerminalReason::GoalReached));
        assert!(traj.min_dist_to(c) >= 0.7 * (1.0 - 1e-6));
        // jumps keep x and bump j by one
        for w in traj.arcs.windows(2) {
            let ArcEnd::Jump(ev) = &w[0].end else { panic!() };
            assert_eq!(w[1].j, w[0].j + 1);
            assert_eq!(&w[1].samples[0].x, &ev.x);
            assert_eq!(w[1].samples[0].t, ev.t);
        }
    }

    #[test]
    fn avoidance_start_takes_one_jump() {
        let law = law();
        let p = law.params();
        let c = p.center();
        let perp = v(&[0., 1., -1.]).normalized().unwrap();
        let dir = c.normalized().unwrap().add_scaled(1.0, &perp).normalized().unwrap();
        let x0 = c.add_scaled(0.85, &dir);
        let tol = membership_tol(&law);
        assert!(law.flow_set_contains(&x0, Mode::AvoidPlus, tol));
        assert!(!law.jump_set_contains(&x0, Mode::AvoidPlus, tol));
        let traj = simulate(&law, &x0, Mode::AvoidPlus, &SimConfig::default()).unwrap();
        assert_eq!(traj.jump_count(), 1);
        assert_eq!(traj.terminal_reason(), Some(TerminalReason::GoalReached));
    }

    #[test]
    fn batch_preserves_order_and_is_deterministic() {
        let law = law();
        assert!(batch_simulate(&law, &[], &SimConfig::default(), true).is_empty());
        let c = law.params().center().clone();
        let inits = vec![
            (c.scale(3.0 / c.norm()), Mode::Stabilize),
            (c.clone(), Mode::Stabilize),
            (c.scale(3.0 / c.norm()), Mode::Stabilize),
        ];
        let out = batch_simulate(&law, &inits, &SimConfig::default(), true);
        assert_eq!(out.len(), 3);
        assert!(out[1].is_err());
        assert_eq!(out[0].as_ref().unwrap(), out[2].as_ref().unwrap());
    }
}
