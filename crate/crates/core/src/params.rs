//! Controller parameterization and its feasibility certificate.
//!
//! [`validate`] walks the admissible intervals in dependency order
//! (`ε_h`, `ε_s`, `μ`, `θ`, `ψ`, `ψ̄`) and reports every violated constraint,
//! then places the two auxiliary attractors `p₁` and `p₋₁` on the cone
//! with vertex `c`, axis `c` and half-aperture `θ`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cone_form, orth_proj_apply, reflect_apply, GeometryError, VecN};

/// Tolerance on the cone-membership certificate of `p₁` and `p₋₁`.
pub const CONE_CERT_TOL: f64 = 1e-9;
/// Slack allowed on the `arccos` argument before it is treated as infeasible.
const ACOS_SLACK: f64 = 1e-12;
/// Minimum relative length of the component of `w_hint` orthogonal to `c`.
const HINT_DEGENERACY: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("obstacle must satisfy ‖c‖ > ε > 0 (got ‖c‖ = {center_norm}, ε = {radius})")]
    ObstacleInfeasible { center_norm: f64, radius: f64 },
    #[error("ε_h = {eps_h} outside ({lo}, {hi})")]
    InfeasibleEpsH { eps_h: f64, lo: f64, hi: f64 },
    #[error("μ = {mu} outside [{lo}, {hi})")]
    InfeasibleMu { mu: f64, lo: f64, hi: f64 },
    #[error("θ = {0} outside (0, π/2)")]
    InfeasibleTheta(f64),
    #[error("arccos argument {0} escaped [-1, 1]")]
    InternalInfeasibility(f64),
    #[error("direction hint is parallel to the obstacle center")]
    DegenerateHint,
    #[error("obstacle center is zero")]
    ZeroCenter,
    #[error("p₁ certificate failed: cone margin {cone_margin}, half-space value {half_space}")]
    ConeCertificate { cone_margin: f64, half_space: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("parameters violate {} constraint(s): {}", .0.len(), format_violations(.0))]
    ValidationFailure(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// The spherical obstacle `B_ε(c)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleSpec {
    center: VecN,
    radius: f64,
}

impl ObstacleSpec {
    pub fn new(center: VecN, radius: f64) -> Result<Self, ParamError> {
        let center_norm = center.norm();
        if !(radius.is_finite() && radius > 0.0 && center_norm > radius) {
            return Err(ParamError::ObstacleInfeasible { center_norm, radius });
        }
        Ok(ObstacleSpec { center, radius })
    }

    pub fn center(&self) -> &VecN {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn center_norm(&self) -> f64 {
        self.center.norm()
    }
}

/// Gains `k₋₁`, `k₀`, `k₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub avoid_minus: f64,
    pub stabilize: f64,
    pub avoid_plus: f64,
}

impl Gains {
    pub fn uniform(k: f64) -> Self {
        Gains { avoid_minus: k, stabilize: k, avoid_plus: k }
    }

    /// From `[k₋₁, k₀, k₁]`.
    pub fn from_array(k: [f64; 3]) -> Self {
        Gains { avoid_minus: k[0], stabilize: k[1], avoid_plus: k[2] }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.avoid_minus, self.stabilize, self.avoid_plus]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawParams {
    pub obstacle: ObstacleSpec,
    pub eps_s: f64,
    pub eps_h: f64,
    pub mu: f64,
    pub theta: f64,
    pub psi: f64,
    pub psi_bar: f64,
    pub gains: Gains,
    /// Seed direction for `p₁`; when absent the first standard basis vector
    /// not parallel to `c` is used.
    pub w_hint: Option<VecN>,
}

/// One violated interval constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: String,
    pub actual: f64,
    pub lower: f64,
    pub upper: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {} not in ({}, {})",
            self.constraint, self.actual, self.lower, self.upper
        )
    }
}

/// Parameters certified feasible, plus the derived bounds and attractors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedParams {
    raw: RawParams,
    mu_min: f64,
    theta_max: f64,
    psi_max: f64,
    p1: VecN,
    p_minus1: VecN,
}

impl ValidatedParams {
    /// Derives the bounds and attractors without enforcing any interval.
    ///
    /// Only for deliberate misconfiguration experiments; nothing downstream
    /// is guaranteed for parameters built this way.
    pub fn new_unchecked(raw: RawParams) -> Result<Self, ParamError> {
        let obs = &raw.obstacle;
        let mu_min = mu_min_formula(obs, raw.eps_h);
        let theta_max = theta_max_ratio(obs, raw.eps_h, raw.mu).clamp(-1.0, 1.0).acos();
        let psi_max = raw.theta.min(FRAC_PI_2 - raw.theta);
        let p1 = construct_p1(obs, raw.theta, raw.w_hint.as_ref())?;
        let p_minus1 = -&reflect_apply(obs.center(), &p1)?;
        Ok(ValidatedParams { raw, mu_min, theta_max, psi_max, p1, p_minus1 })
    }

    pub fn raw(&self) -> &RawParams {
        &self.raw
    }
    pub fn obstacle(&self) -> &ObstacleSpec {
        &self.raw.obstacle
    }
    pub fn center(&self) -> &VecN {
        self.raw.obstacle.center()
    }
    pub fn epsilon(&self) -> f64 {
        self.raw.obstacle.radius()
    }
    pub fn dim(&self) -> usize {
        self.raw.obstacle.dim()
    }
    pub fn eps_s(&self) -> f64 {
        self.raw.eps_s
    }
    pub fn eps_h(&self) -> f64 {
        self.raw.eps_h
    }
    pub fn mu(&self) -> f64 {
        self.raw.mu
    }
    pub fn theta(&self) -> f64 {
        self.raw.theta
    }
    pub fn psi(&self) -> f64 {
        self.raw.psi
    }
    pub fn psi_bar(&self) -> f64 {
        self.raw.psi_bar
    }
    pub fn gains(&self) -> Gains {
        self.raw.gains
    }
    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }
    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }
    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }
    pub fn p1(&self) -> &VecN {
        &self.p1
    }
    pub fn p_minus1(&self) -> &VecN {
        &self.p_minus1
    }
}

fn mu_min_formula(obs: &ObstacleSpec, eps_h: f64) -> f64 {
    let (eps, nc) = (obs.radius(), obs.center_norm());
    0.5 * (eps_h * eps_h + nc * nc - 2.0 * eps * nc) / (nc * nc - eps * nc)
}

fn theta_max_ratio(obs: &ObstacleSpec, eps_h: f64, mu: f64) -> f64 {
    let (eps, nc) = (obs.radius(), obs.center_norm());
    (eps_h * eps_h + nc * nc * (1.0 - 2.0 * mu)) / (2.0 * eps * nc * (1.0 - mu))
}

/// Admissible open interval for `ε_h`: `(ε, √(ε‖c‖))`.
pub fn eps_h_interval(obs: &ObstacleSpec) -> (f64, f64) {
    (obs.radius(), (obs.radius() * obs.center_norm()).sqrt())
}

/// Lower bound on `μ` for a given helmet thickness `ε_h`; lies in `(0, 1/2)`.
pub fn mu_min(obs: &ObstacleSpec, eps_h: f64) -> Result<f64, ParamError> {
    let (lo, hi) = eps_h_interval(obs);
    if !(eps_h > lo && eps_h < hi) {
        return Err(ParamError::InfeasibleEpsH { eps_h, lo, hi });
    }
    Ok(mu_min_formula(obs, eps_h))
}

/// Upper bound on `θ`.
///
/// Accepts `μ ∈ [μ_min, 1/2)`; the closed left end returns `0`, which
/// [`validate`] then rejects through the strict `θ > 0` requirement.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn theta_max(obs: &ObstacleSpec, eps_h: f64, mu: f64) -> Result<f64, ParamError> {
    let lo = mu_min(obs, eps_h)?;
    if !(mu >= lo && mu < 0.5) {
        return Err(ParamError::InfeasibleMu { mu, lo, hi: 0.5 });
    }
    let ratio = theta_max_ratio(obs, eps_h, mu);
    if !(ratio.abs() <= 1.0 + ACOS_SLACK) {
        return Err(ParamError::InternalInfeasibility(ratio));
    }
    Ok(ratio.clamp(-1.0, 1.0).acos())
}

/// `min(θ, π/2 - θ)`.
pub fn psi_max(theta: f64) -> Result<f64, ParamError> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(ParamError::InfeasibleTheta(theta));
    }
    Ok(theta.min(FRAC_PI_2 - theta))
}

fn default_hint(center: &VecN) -> Result<VecN, ParamError> {
    let n = center.dim();
    let scale = center.norm();
    (0..n)
        .map(|i| VecN::basis(n, i))
        .find(|e| {
            orth_proj_apply(center, e)
                .map(|w| w.norm() > HINT_DEGENERACY * scale.max(1.0))
                .unwrap_or(false)
        })
        .ok_or(ParamError::DegenerateHint)
}

/// Places `p₁` on the origin-facing nappe of the cone with vertex `c`,
/// axis `c` and half-aperture `θ`, at distance `‖c‖` from `c`:
/// `p₁ = c - ‖c‖ (cos θ ĉ + sin θ ŵ)`, with `ŵ` the normalized component of
/// `w_hint` orthogonal to `c`.
pub fn construct_p1(
    obs: &ObstacleSpec,
    theta: f64,
    w_hint: Option<&VecN>,
) -> Result<VecN, ParamError> {
    let c = obs.center();
    let nc = c.norm();
    if nc == 0.0 {
        return Err(ParamError::ZeroCenter);
    }
    let hint = match w_hint {
        Some(w) => {
            w.check_dim(c.dim())?;
            w.clone()
        }
        None => default_hint(c)?,
    };
    let w_perp = orth_proj_apply(c, &hint)?;
    if w_perp.norm() <= HINT_DEGENERACY * hint.norm().max(f64::MIN_POSITIVE) {
        return Err(ParamError::DegenerateHint);
    }
    let w_hat = w_perp.normalized()?;
    let c_hat = c.scale(1.0 / nc);
    let (s, co) = theta.sin_cos();
    let p1 = c.add_scaled(-nc * co, &c_hat).add_scaled(-nc * s, &w_hat);

    let cone_margin = cone_form(c, c, theta, &p1)?;
    let half_space = c.dot(&(&p1 - c));
    if cone_margin.abs() > CONE_CERT_TOL * nc * nc || half_space > 0.0 {
        return Err(ParamError::ConeCertificate { cone_margin, half_space });
    }
    Ok(p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not evaluated because a bound it depends on could not be computed.
    Skipped,
}

/// Outcome of one open-interval constraint `lower < actual < upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub constraint: String,
    pub actual: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: CheckStatus,
}

impl ConstraintCheck {
    fn open(name: &str, actual: f64, lower: f64, upper: f64) -> Self {
        let status = if actual > lower && actual < upper { CheckStatus::Pass } else { CheckStatus::Fail };
        ConstraintCheck { constraint: name.to_string(), actual, lower: Some(lower), upper: Some(upper), status }
    }

    fn skipped(name: &str, actual: f64) -> Self {
        ConstraintCheck { constraint: name.to_string(), actual, lower: None, upper: None, status: CheckStatus::Skipped }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Evaluates every feasibility constraint in dependency order.
///
/// A bound that cannot be computed because its prerequisite failed is
/// reported as skipped rather than guessed.
pub fn check_constraints(raw: &RawParams) -> Result<Vec<ConstraintCheck>, ParamError> {
    let obs = &raw.obstacle;
    let mut out = Vec::new();

    for (name, k) in [("k_-1", raw.gains.avoid_minus), ("k_0", raw.gains.stabilize), ("k_1", raw.gains.avoid_plus)] {
        out.push(ConstraintCheck::open(name, k, 0.0, f64::INFINITY));
    }

    let (eh_lo, eh_hi) = eps_h_interval(obs);
    let eps_h = ConstraintCheck::open("eps_h", raw.eps_h, eh_lo, eh_hi);
    let eps_h_ok = eps_h.passed();
    out.push(eps_h);
    out.push(ConstraintCheck::open("eps_s", raw.eps_s, obs.radius(), raw.eps_h));

    let mut theta_max_value = None;
    if eps_h_ok {
        let mu = ConstraintCheck::open("mu", raw.mu, mu_min_formula(obs, raw.eps_h), 0.5);
        if mu.passed() {
            theta_max_value = Some(theta_max(obs, raw.eps_h, raw.mu)?);
        }
        out.push(mu);
    } else {
        out.push(ConstraintCheck::skipped("mu", raw.mu));
    }
    match theta_max_value {
        Some(tm) => out.push(ConstraintCheck::open("theta", raw.theta, 0.0, tm)),
        None => out.push(ConstraintCheck::open("theta", raw.theta, 0.0, FRAC_PI_2)),
    }

    match psi_max(raw.theta) {
        Ok(pm) => {
            out.push(ConstraintCheck::open("psi", raw.psi, 0.0, pm));
            out.push(ConstraintCheck::open("psi_bar", raw.psi_bar, raw.psi, pm));
        }
        Err(_) => {
            out.push(ConstraintCheck::skipped("psi", raw.psi));
            out.push(ConstraintCheck::skipped("psi_bar", raw.psi_bar));
        }
    }
    Ok(out)
}

/// Certifies a full parameter set.
///
/// Every violated constraint is returned together; see [`check_constraints`].
pub fn validate(raw: RawParams) -> Result<ValidatedParams, ParamError> {
    let violations: Vec<Violation> = check_constraints(&raw)?
        .into_iter()
        .filter(|c| c.status == CheckStatus::Fail)
        .map(|c| Violation {
            constraint: c.constraint,
            actual: c.actual,
            lower: c.lower.unwrap_or(f64::NEG_INFINITY),
            upper: c.upper.unwrap_or(f64::INFINITY),
        })
        .collect();
    if !violations.is_empty() {
        return Err(ParamError::ValidationFailure(violations));
    }

    let params = ValidatedParams::new_unchecked(raw)?;
    let c = params.center();
    let nc = c.norm();
    for p in [&params.p1, &params.p_minus1] {
        let cone_margin = cone_form(c, c, params.theta(), p)?;
        let half_space = c.dot(&(p - c));
        if cone_margin.abs() > CONE_CERT_TOL * nc * nc || half_space > 0.0 || p == c {
            return Err(ParamError::ConeCertificate { cone_margin, half_space });
        }
    }
    Ok(params)
}

impl RawParams {
    /// The three-dimensional reference configuration used throughout the
    /// examples and acceptance tests.
    pub fn reference_3d() -> Self {
        RawParams {
            obstacle: ObstacleSpec::new(VecN::from_slice(&[1.0, 1.0, 1.0]).unwrap(), 0.700).unwrap(),
            eps_s: 0.800,
            eps_h: 0.901,
            mu: 0.444,
            theta: 0.276,
            psi: 0.249,
            psi_bar: 0.266,
            gains: Gains::uniform(1.0),
            w_hint: Some(VecN::from_slice(&[-2.0, 1.0, 1.0]).unwrap()),
        }
    }
}
