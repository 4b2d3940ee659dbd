//! The hybrid feedback: control law, flow and jump sets per mode, and the
//! jump map.
//!
//! Set memberships are expressed through continuous margins (`<= 0` inside).
//! With `d = ‖x - c‖`, helmet faces `a = ε - d`, `b = d - r`,
//! `e = ‖ρc‖ - ‖x - ρc‖` and the backward half-cone values
//! `q = (x-c)ᵀπ^ψ(v)(x-c)`, `s = vᵀ(x-c)` with `v = p_m - c`:
//!
//! | set  | margin                                  |
//! |------|-----------------------------------------|
//! | `J₀` | `max(a, b, e)` with `r = ε_s`, `ρ = 1/2` |
//! | `F₀` | `max(a, min(-b, -e))`                    |
//! | `F_m`| `max(a, b, e, min(-q, -s))` with `r = ε_h`, `ρ = μ` |
//! | `J_m`| `max(a, min(-b, -e, max(q, s)))`         |
//!
//! `F₀`/`J_m` are the closures of the complements of `J₀ ∪ B_ε(c)` and
//! `F_m ∪ B_ε(c)` respectively.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cone_form, helmet_faces, orth_proj_apply, GeometryError, VecN};
use crate::params::ValidatedParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("avoidance law is undefined at the obstacle center")]
    AtObstacleCenter,
    #[error("jump map is empty at {0:?}")]
    EmptyJumpTarget(VecN),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Discrete controller mode. `0` stabilizes, `±1` follows the obstacle
/// boundary toward `p_{±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Mode {
    AvoidMinus,
    Stabilize,
    AvoidPlus,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::AvoidMinus, Mode::Stabilize, Mode::AvoidPlus];
    pub const AVOIDANCE: [Mode; 2] = [Mode::AvoidPlus, Mode::AvoidMinus];

    pub fn as_i8(self) -> i8 {
        match self {
            Mode::AvoidMinus => -1,
            Mode::Stabilize => 0,
            Mode::AvoidPlus => 1,
        }
    }

    pub fn from_i8(m: i8) -> Option<Mode> {
        match m {
            -1 => Some(Mode::AvoidMinus),
            0 => Some(Mode::Stabilize),
            1 => Some(Mode::AvoidPlus),
            _ => None,
        }
    }

    pub fn is_avoidance(self) -> bool {
        self != Mode::Stabilize
    }
}

impl TryFrom<i8> for Mode {
    type Error = String;

    fn try_from(m: i8) -> Result<Self, Self::Error> {
        Mode::from_i8(m).ok_or_else(|| format!("mode must be -1, 0 or 1 (got {m})"))
    }
}

impl From<Mode> for i8 {
    fn from(m: Mode) -> i8 {
        m.as_i8()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// Outcome of the jump map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpTarget {
    pub mode: Mode,
    /// Both avoidance modes were admissible and a tie-break was applied.
    pub ambiguous: bool,
}

/// The hybrid control law with its geometric data precomputed.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    params: ValidatedParams,
    axis_plus: VecN,
    axis_minus: VecN,
}

impl ControlLaw {
    pub fn new(params: ValidatedParams) -> Self {
        let c = params.center();
        let axis_plus = params.p1() - c;
        let axis_minus = params.p_minus1() - c;
        ControlLaw { params, axis_plus, axis_minus }
    }

    pub fn params(&self) -> &ValidatedParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn gain(&self, m: Mode) -> f64 {
        let g = self.params.gains();
        match m {
            Mode::AvoidMinus => g.avoid_minus,
            Mode::Stabilize => g.stabilize,
            Mode::AvoidPlus => g.avoid_plus,
        }
    }

    /// Attractor of each mode; the origin for the stabilizing mode.
    pub fn attractor(&self, m: Mode) -> VecN {
        match m {
            Mode::AvoidMinus => self.params.p_minus1().clone(),
            Mode::Stabilize => VecN::zeros(self.dim()),
            Mode::AvoidPlus => self.params.p1().clone(),
        }
    }

    /// Cone axis `p_m - c`. Panics for the stabilizing mode.
    pub fn axis(&self, m: Mode) -> &VecN {
        match m {
            Mode::AvoidPlus => &self.axis_plus,
            Mode::AvoidMinus => &self.axis_minus,
            Mode::Stabilize => panic!("stabilizing mode has no cone axis"),
        }
    }

    /// `κ(x, m)`: `-k₀ x` when stabilizing, `-k_m π⊥(x-c)(x-p_m)` when avoiding.
    pub fn kappa(&self, x: &VecN, m: Mode) -> Result<VecN, ControlError> {
        x.check_dim(self.dim())?;
        match m {
            Mode::Stabilize => Ok(x.scale(-self.gain(m))),
            _ => {
                let c = self.params.center();
                let r = x - c;
                if r.is_zero() {
                    return Err(ControlError::AtObstacleCenter);
                }
                let p = match m {
                    Mode::AvoidPlus => self.params.p1(),
                    _ => self.params.p_minus1(),
                };
                Ok(orth_proj_apply(&r, &(x - p))?.scale(-self.gain(m)))
            }
        }
    }

    fn stab_faces(&self, x: &VecN) -> [f64; 3] {
        let p = &self.params;
        helmet_faces(p.center(), p.epsilon(), p.eps_s(), 0.5, x)
    }

    fn avoid_faces(&self, x: &VecN) -> [f64; 3] {
        let p = &self.params;
        helmet_faces(p.center(), p.epsilon(), p.eps_h(), p.mu(), x)
    }

    /// `(q, s)` for the backward half-cone of mode `m` with half-aperture `psi`.
    fn half_cone_values(&self, x: &VecN, m: Mode, psi: f64) -> (f64, f64) {
        let c = self.params.center();
        let v = self.axis(m);
        let q = cone_form(c, v, psi, x).expect("axis is nonzero and dimensions agree");
        let s = v.dot(&(x - c));
        (q, s)
    }

    pub fn flow_margin(&self, x: &VecN, m: Mode) -> f64 {
        match m {
            Mode::Stabilize => {
                let [a, b, e] = self.stab_faces(x);
                a.max((-b).min(-e))
            }
            _ => {
                let [a, b, e] = self.avoid_faces(x);
                let (q, s) = self.half_cone_values(x, m, self.params.psi());
                a.max(b).max(e).max((-q).min(-s))
            }
        }
    }

    pub fn jump_margin(&self, x: &VecN, m: Mode) -> f64 {
        match m {
            Mode::Stabilize => {
                let [a, b, e] = self.stab_faces(x);
                a.max(b).max(e)
            }
            _ => {
                let [a, b, e] = self.avoid_faces(x);
                let (q, s) = self.half_cone_values(x, m, self.params.psi());
                a.max((-b).min(-e).min(q.max(s)))
            }
        }
    }

    pub fn flow_set_contains(&self, x: &VecN, m: Mode, tol: f64) -> bool {
        self.flow_margin(x, m) <= tol
    }

    pub fn jump_set_contains(&self, x: &VecN, m: Mode, tol: f64) -> bool {
        self.jump_margin(x, m) <= tol
    }

    /// Margin of `x` in the jump-target region `C^≥(c, p_m - c, ψ̄)` of mode `m`.
    pub fn jump_target_margin(&self, x: &VecN, m: Mode) -> f64 {
        let (q, _) = self.half_cone_values(x, m, self.params.psi_bar());
        -q
    }

    /// Angle between the line through `x - c` and the axis line of mode `m`,
    /// in `[0, π/2]`.
    pub fn axis_line_angle(&self, x: &VecN, m: Mode) -> f64 {
        let r = x - self.params.center();
        let v = self.axis(m);
        let cos = (r.dot(v) / (r.norm() * v.norm())).abs().min(1.0);
        cos.acos()
    }

    /// The jump map. From an avoidance mode the target is always the
    /// stabilizing mode. From the stabilizing mode the target is an
    /// avoidance mode whose ψ̄-cone excludes `x`; if both qualify, the one
    /// whose axis line is angularly farther from `x - c` wins, and an exact
    /// tie goes to `+1`.
    pub fn jump_select(&self, x: &VecN, m: Mode, tol: f64) -> Result<JumpTarget, ControlError> {
        x.check_dim(self.dim())?;
        if m.is_avoidance() {
            return Ok(JumpTarget { mode: Mode::Stabilize, ambiguous: false });
        }
        let candidates: Vec<Mode> = Mode::AVOIDANCE
            .into_iter()
            .filter(|&mp| self.jump_target_margin(x, mp) <= tol)
            .collect();
        match candidates.as_slice() {
            [] => Err(ControlError::EmptyJumpTarget(x.clone())),
            [only] => Ok(JumpTarget { mode: *only, ambiguous: false }),
            _ => {
                let plus = self.axis_line_angle(x, Mode::AvoidPlus);
                let minus = self.axis_line_angle(x, Mode::AvoidMinus);
                let mode = if minus > plus + 1e-12 { Mode::AvoidMinus } else { Mode::AvoidPlus };
                Ok(JumpTarget { mode, ambiguous: true })
            }
        }
    }
}
