//! Rotations, the set of half-turns and the double cover by the unit sphere.
//!
//! The half-turns (180-degree rotations) are exactly the symmetric rotation
//! matrices of trace -1. Every unit vector `q` produces one of them through
//! `cover(q) = 2 q⊗q - I`, and `q`, `-q` produce the same one. Fields of
//! half-turns are therefore handled through an S²-valued lift `n` with
//! `R = cover(n)`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const UNIT_TOL: f64 = 1e-12;
const GROUP_TOL: f64 = 1e-10;

/// A vector of length one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(Vec3);

impl UnitVector {
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidUnitVector { norm });
        }
        Ok(UnitVector(v))
    }

    /// Normalizes `v`; `None` for (numerically) zero input.
    pub fn normalize(v: Vec3) -> Option<Self> {
        let norm = v.norm();
        if norm < 1e-300 || !norm.is_finite() {
            None
        } else {
            Some(UnitVector(v / norm))
        }
    }

    pub fn e3() -> Self {
        UnitVector(Vec3::z())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }
}

impl std::ops::Neg for UnitVector {
    type Output = UnitVector;
    fn neg(self) -> UnitVector {
        UnitVector(-self.0)
    }
}

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn new(m: Mat3) -> Result<Self> {
        let residual = orthogonality_residual(&m).max((m.determinant() - 1.0).abs());
        if residual > GROUP_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not a rotation (residual {residual:.3e})"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Smallest rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: &Vec3, to: &Vec3) -> Self {
        let c = from.dot(to);
        let axis = from.cross(to);
        let s = axis.norm();
        if s < 1e-14 {
            if c > 0.0 {
                return Rotation::identity();
            }
            // half-turn about any axis orthogonal to `from`
            let ortho = any_orthogonal(from);
            return Rotation(2.0 * ortho * ortho.transpose() - Mat3::identity());
        }
        let k = axis / s;
        let kx = skew_matrix(&k);
        let m = Mat3::identity() + s * kx + (1.0 - c) * kx * kx;
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }
}

/// A 180-degree rotation about some axis: symmetric, orthogonal, trace -1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRotation(Mat3);

impl AxisRotation {
    pub fn new(m: Mat3) -> Result<Self> {
        let residual = axis_rotation_residual(&m);
        if residual > GROUP_TOL {
            return Err(Error::NotAxisRotation { residual });
        }
        Ok(AxisRotation(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn as_rotation(&self) -> Rotation {
        Rotation(self.0)
    }
}

/// Weights of the Cosserat energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialConstants {
    pub mu1: f64,
    pub muc: f64,
    pub mu2: f64,
    pub lambda: f64,
    pub p: f64,
}

impl MaterialConstants {
    pub fn new(mu1: f64, muc: f64, mu2: f64, lambda: f64, p: f64) -> Result<Self> {
        let c = MaterialConstants { mu1, muc, mu2, lambda, p };
        c.validate()?;
        Ok(c)
    }

    /// All weights one and p = 2; `p_operator` is then the identity.
    pub fn unit() -> Self {
        MaterialConstants { mu1: 1.0, muc: 1.0, mu2: 1.0, lambda: 1.0, p: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.mu1, self.muc, self.mu2, self.lambda];
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("material weights must be positive".into()));
        }
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(Error::InvalidInput("curvature exponent p must be >= 2".into()));
        }
        Ok(())
    }

    pub fn is_unit(&self) -> bool {
        *self == MaterialConstants::unit()
    }
}

impl Default for MaterialConstants {
    fn default() -> Self {
        MaterialConstants::unit()
    }
}

/// `q ↦ 2 q⊗q − I`.
pub fn cover(q: &UnitVector) -> AxisRotation {
    AxisRotation(cover_matrix(&q.0))
}

/// Unchecked version of [`cover`] for hot loops; `q` should have unit length.
#[inline]
pub fn cover_matrix(q: &Vec3) -> Mat3 {
    2.0 * q * q.transpose() - Mat3::identity()
}

/// The rotation axis of a half-turn, with the first component of magnitude
/// above 1e-6 made positive.
pub fn axis_of(r: &AxisRotation) -> UnitVector {
    // (R + I)/2 = q⊗q; the column with the largest diagonal entry is the
    // best-conditioned multiple of q.
    let m = (r.0 + Mat3::identity()) * 0.5;
    let k = (0..3)
        .max_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)]))
        .unwrap_or(0);
    let col: Vec3 = m.column(k).into();
    let q = col / col.norm();
    UnitVector(canonical_sign(q))
}

/// Flips `q` so that its first component of magnitude above 1e-6 is positive.
pub fn canonical_sign(q: Vec3) -> Vec3 {
    for i in 0..3 {
        if q[i].abs() > 1e-6 {
            return if q[i] > 0.0 { q } else { -q };
        }
    }
    q
}

/// The differential of `cover` at `q` applied to tangent vector `v`:
/// `2 (v⊗q + q⊗v)`. Its squared Frobenius norm is `8 |v|²`.
pub fn cover_differential(q: &UnitVector, v: &Vec3) -> Result<Mat3> {
    let dot = q.0.dot(v);
    if dot.abs() > 1e-10 * (1.0 + v.norm()) {
        return Err(Error::NotTangent { dot });
    }
    Ok(cover_differential_unchecked(&q.0, v))
}

#[inline]
pub fn cover_differential_unchecked(q: &Vec3, v: &Vec3) -> Mat3 {
    2.0 * (v * q.transpose() + q * v.transpose())
}

/// `√μ₁ dev sym A + √μc skew A + (√μ₂/3) tr(A) I`.
pub fn p_operator(a: &Mat3, c: &MaterialConstants) -> Mat3 {
    let tr = a.trace();
    let sym = (a + a.transpose()) * 0.5;
    let skew = (a - a.transpose()) * 0.5;
    let dev = sym - Mat3::identity() * (tr / 3.0);
    dev * c.mu1.sqrt() + skew * c.muc.sqrt() + Mat3::identity() * (c.mu2.sqrt() / 3.0 * tr)
}

/// Pointwise Cosserat energy density, split into the deformation term
/// `|P(RᵀDφ − I)|²` and the curvature term `λ |RᵀDR|^p`.
///
/// `r` must be a rotation; `dr[k]` is the partial derivative of `R` along the
/// k-th coordinate direction. The curvature norm runs over all 27 entries.
pub fn cosserat_density(dphi: &Mat3, r: &Mat3, dr: &[Mat3; 3], c: &MaterialConstants) -> (f64, f64) {
    let strain = r.transpose() * dphi - Mat3::identity();
    let deformation = if c.is_unit() {
        strain.norm_squared()
    } else {
        p_operator(&strain, c).norm_squared()
    };
    let mut curv_sq = 0.0;
    for d in dr {
        curv_sq += (r.transpose() * d).norm_squared();
    }
    let curvature = if c.p == 2.0 {
        c.lambda * curv_sq
    } else {
        c.lambda * curv_sq.powf(c.p / 2.0)
    };
    (deformation, curvature)
}

/// Principal axis of a symmetric positive semidefinite matrix, e.g. an
/// average of projectors `n⊗n`. Sign is canonicalized.
pub fn dominant_axis(m: &Mat3) -> Vec3 {
    // fast path: one dominant column is usually enough
    let eig = SymmetricEigen::new(*m);
    let k = eig.eigenvalues.imax();
    let v: Vec3 = eig.eigenvectors.column(k).into();
    canonical_sign(v / v.norm())
}

pub fn skew_matrix(k: &Vec3) -> Mat3 {
    Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0)
}

/// Some unit vector orthogonal to `v` (which need not be normalized).
pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
    let w = v.cross(&a);
    w / w.norm()
}

fn orthogonality_residual(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

fn axis_rotation_residual(m: &Mat3) -> f64 {
    orthogonality_residual(m)
        .max((m.determinant() - 1.0).abs())
        .max((m - m.transpose()).norm())
        .max((m.trace() + 1.0).abs())
}
