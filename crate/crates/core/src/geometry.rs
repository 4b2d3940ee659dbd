//! Dense vectors, projection operators and region margins.
//!
//! Every region is described by a continuous signed margin `g(x)` with
//! `g(x) <= 0` exactly on the closed region. Membership tests, event
//! detection and the property checks are all built on margins.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|‖u‖ - 1|` accepted by [`geodesic_dist`].
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("direction vector has zero norm")]
    ZeroDirection,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("vector has a non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),
    #[error("malformed region: {0}")]
    MalformedRegion(String),
}

/// A finite real vector of runtime dimension `n >= 2`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VecN(Vec<f64>);

impl VecN {
    pub fn new(entries: Vec<f64>) -> Result<Self, GeometryError> {
        if entries.len() < 2 {
            return Err(GeometryError::DimensionTooSmall(entries.len()));
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        Ok(VecN(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self, GeometryError> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2, "VecN requires n >= 2");
        VecN(vec![0.0; n])
    }

    /// The `i`-th standard basis vector of dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dot(&self, other: &VecN) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &VecN) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dist");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> VecN {
        VecN(self.0.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &VecN) -> VecN {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in add_scaled");
        VecN(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn normalized(&self) -> Result<VecN, GeometryError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs_diff(&self, other: &VecN) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_dim(&self, expected: usize) -> Result<(), GeometryError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch {
                expected,
                got: self.dim(),
            })
        }
    }
}

impl TryFrom<Vec<f64>> for VecN {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        VecN::new(v)
    }
}

impl From<VecN> for Vec<f64> {
    fn from(v: VecN) -> Self {
        v.0
    }
}

impl fmt::Debug for VecN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for VecN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match f.precision() {
                Some(p) => write!(f, "{v:.p$}")?,
                None => write!(f, "{v}")?,
            }
        }
        write!(f, ")")
    }
}

impl std::ops::Index<usize> for VecN {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> Add<&'a VecN> for &'a VecN {
    type Output = VecN;

    fn add(self, rhs: &'a VecN) -> VecN {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in add");
        VecN(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a VecN> for &'a VecN {
    type Output = VecN;

    fn sub(self, rhs: &'a VecN) -> VecN {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sub");
        VecN(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &VecN {
    type Output = VecN;

    fn mul(self, s: f64) -> VecN {
        self.scale(s)
    }
}

impl Neg for &VecN {
    type Output = VecN;

    fn neg(self) -> VecN {
        self.scale(-1.0)
    }
}

fn check_pair(z: &VecN, x: &VecN) -> Result<f64, GeometryError> {
    x.check_dim(z.dim())?;
    let zz = z.norm_sq();
    if zz == 0.0 {
        return Err(GeometryError::ZeroDirection);
    }
    Ok(zz)
}

/// `π∥(z) x = (zᵀx / ‖z‖²) z`
pub fn par_proj_apply(z: &VecN, x: &VecN) -> Result<VecN, GeometryError> {
    let zz = check_pair(z, x)?;
    Ok(z.scale(z.dot(x) / zz))
}

/// `π⊥(z) x = x - π∥(z) x`
pub fn orth_proj_apply(z: &VecN, x: &VecN) -> Result<VecN, GeometryError> {
    let zz = check_pair(z, x)?;
    Ok(x.add_scaled(-z.dot(x) / zz, z))
}

/// Householder reflection of `x` about the hyperplane orthogonal to `z`.
pub fn reflect_apply(z: &VecN, x: &VecN) -> Result<VecN, GeometryError> {
    let zz = check_pair(z, x)?;
    Ok(x.add_scaled(-2.0 * z.dot(x) / zz, z))
}

/// `π^θ(z) x = cos²θ π⊥(z) x - sin²θ π∥(z) x`
pub fn pi_theta_apply(z: &VecN, theta: f64, x: &VecN) -> Result<VecN, GeometryError> {
    let par = par_proj_apply(z, x)?;
    let orth = x - &par;
    let (s, c) = theta.sin_cos();
    Ok(orth.scale(c * c).add_scaled(-(s * s), &par))
}

/// Quadratic cone form `(x - c)ᵀ π^θ(v) (x - c)`.
///
/// Negative strictly inside the double cone with vertex `c`, axis `v` and
/// half-aperture `theta`, zero on its surface.
pub fn cone_form(vertex: &VecN, axis: &VecN, theta: f64, x: &VecN) -> Result<f64, GeometryError> {
    let vv = check_pair(axis, x)?;
    vertex.check_dim(axis.dim())?;
    let y = x - vertex;
    let a = axis.dot(&y);
    let par = a * a / vv;
    let orth = y.norm_sq() - par;
    let (s, c) = theta.sin_cos();
    Ok(c * c * orth - s * s * par)
}

/// Distance from `x` to the line through `point` with direction `direction`.
pub fn dist_to_line(point: &VecN, direction: &VecN, x: &VecN) -> Result<f64, GeometryError> {
    point.check_dim(direction.dim())?;
    let y = x - point;
    Ok(orth_proj_apply(direction, &y)?.norm())
}

/// Great-circle distance between two unit vectors, in `[0, π]`.
pub fn geodesic_dist(u: &VecN, v: &VecN) -> Result<f64, GeometryError> {
    v.check_dim(u.dim())?;
    for w in [u, v] {
        let n = w.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::NotUnit { norm: n });
        }
    }
    Ok(u.dot(v).clamp(-1.0, 1.0).acos())
}

/// The three face margins of the helmet `H(c, ε, ε', μ)`:
/// `[ε - ‖x-c‖, ‖x-c‖ - ε', ‖μc‖ - ‖x-μc‖]`.
pub fn helmet_faces(center: &VecN, inner: f64, outer: f64, mu: f64, x: &VecN) -> [f64; 3] {
    let d = x.dist(center);
    let mc = center.scale(mu);
    [inner - d, d - outer, mc.norm() - x.dist(&mc)]
}

/// Comparison selector used by half-spaces and cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Comparison {
    /// Margin of the closed variant of `s ⋈ 0`.
    fn apply(self, s: f64) -> f64 {
        match self {
            Comparison::Le | Comparison::Lt => s,
            Comparison::Ge | Comparison::Gt => -s,
            Comparison::Eq => s.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Ball {
        center: VecN,
        radius: f64,
    },
    Line {
        point: VecN,
        direction: VecN,
    },
    HalfSpace {
        point: VecN,
        normal: VecN,
        cmp: Comparison,
    },
    Cone {
        vertex: VecN,
        axis: VecN,
        half_angle: f64,
        cmp: Comparison,
    },
    /// Cone region restricted to one side of the hyperplane through the
    /// vertex orthogonal to the axis.
    HalfCone {
        vertex: VecN,
        axis: VecN,
        half_angle: f64,
        cmp: Comparison,
        half: Comparison,
    },
    /// Closed shell `inner <= ‖x-c‖ <= outer` with the ball `B_{‖μc‖}(μc)` removed.
    Helmet {
        center: VecN,
        inner: f64,
        outer: f64,
        mu: f64,
    },
}

fn malformed(msg: impl Into<String>) -> GeometryError {
    GeometryError::MalformedRegion(msg.into())
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } | Region::Helmet { center, .. } => center.dim(),
            Region::Line { point, .. } | Region::HalfSpace { point, .. } => point.dim(),
            Region::Cone { vertex, .. } | Region::HalfCone { vertex, .. } => vertex.dim(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Region::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(malformed("ball radius must be finite and nonnegative"));
                }
            }
            Region::Line { point, direction } | Region::HalfSpace { point, normal: direction, .. } => {
                direction.check_dim(point.dim())?;
                if direction.is_zero() {
                    return Err(GeometryError::ZeroDirection);
                }
            }
            Region::Cone { vertex, axis, half_angle, .. } => {
                axis.check_dim(vertex.dim())?;
                if axis.is_zero() {
                    return Err(GeometryError::ZeroDirection);
                }
                if !half_angle.is_finite() {
                    return Err(malformed("cone half-angle must be finite"));
                }
            }
            Region::HalfCone { vertex, axis, half_angle, half, .. } => {
                axis.check_dim(vertex.dim())?;
                if axis.is_zero() {
                    return Err(GeometryError::ZeroDirection);
                }
                if !half_angle.is_finite() {
                    return Err(malformed("cone half-angle must be finite"));
                }
                if *half == Comparison::Eq {
                    return Err(malformed("half selector cannot be '='"));
                }
            }
            Region::Helmet { inner, outer, mu, .. } => {
                if !(*inner > 0.0 && inner <= outer && outer.is_finite()) {
                    return Err(malformed("helmet requires 0 < inner <= outer"));
                }
                if !(*mu > 0.0 && mu.is_finite()) {
                    return Err(malformed("helmet requires mu > 0"));
                }
            }
        }
        Ok(())
    }

    /// Continuous signed margin; `<= 0` exactly on the closed region.
    pub fn margin(&self, x: &VecN) -> Result<f64, GeometryError> {
        self.validate()?;
        x.check_dim(self.dim())?;
        let g = match self {
            Region::Ball { center, radius } => x.dist(center) - radius,
            Region::Line { point, direction } => dist_to_line(point, direction, x)?,
            Region::HalfSpace { point, normal, cmp } => cmp.apply(normal.dot(&(x - point))),
            Region::Cone { vertex, axis, half_angle, cmp } => {
                cmp.apply(cone_form(vertex, axis, *half_angle, x)?)
            }
            Region::HalfCone { vertex, axis, half_angle, cmp, half } => {
                let cone = cmp.apply(cone_form(vertex, axis, *half_angle, x)?);
                let side = half.apply(axis.dot(&(x - vertex)));
                cone.max(side)
            }
            Region::Helmet { center, inner, outer, mu } => {
                let [a, b, c] = helmet_faces(center, *inner, *outer, *mu, x);
                a.max(b).max(c)
            }
        };
        Ok(g)
    }

    pub fn contains(&self, x: &VecN, tol: f64) -> Result<bool, GeometryError> {
        debug_assert!(tol >= 0.0);
        Ok(self.margin(x)? <= tol)
    }
}
