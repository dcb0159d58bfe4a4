//! Point evaluation of fields, so probes can query grids and analytic
//! constructions through one interface.

use crate::grid::CosseratField;
use crate::so3::Vec3;

/// A segment near which a field varies on a scale much finer than its
/// nominal resolution. `thickness` is interpolated linearly from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feature {
    pub a: Vec3,
    pub b: Vec3,
    pub thickness_a: f64,
    pub thickness_b: f64,
}

impl Feature {
    pub fn segment(a: Vec3, b: Vec3, thickness: f64) -> Self {
        Feature { a, b, thickness_a: thickness, thickness_b: thickness }
    }

    /// Distance from `x` to the segment and the local thickness at the closest point.
    pub fn distance(&self, x: &Vec3) -> (f64, f64) {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((x - self.a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let p = self.a + ab * t;
        ((x - p).norm(), self.thickness_a + (self.thickness_b - self.thickness_a) * t)
    }
}

/// A field that can be evaluated anywhere in its support.
pub trait FieldSampler: Sync {
    /// `(φ(x), n(x))`, with `n` a unit vector. `None` outside the support.
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)>;

    /// Axis of `R(x)`; the sign carries no meaning.
    fn axis(&self, x: &Vec3) -> Option<Vec3> {
        self.sample(x).map(|s| s.1)
    }

    fn phi(&self, x: &Vec3) -> Option<Vec3> {
        self.sample(x).map(|s| s.0)
    }

    /// Fine-scale structure that probes must resolve.
    fn features(&self) -> Vec<Feature> {
        Vec::new()
    }

    /// Points the field itself knows to be candidates for singularities.
    fn candidate_singularities(&self) -> Vec<Vec3> {
        Vec::new()
    }
}

impl FieldSampler for CosseratField {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        Some((self.interpolate_phi(x)?, self.interpolate_axis(x)?))
    }

    fn axis(&self, x: &Vec3) -> Option<Vec3> {
        self.interpolate_axis(x)
    }

    fn phi(&self, x: &Vec3) -> Option<Vec3> {
        self.interpolate_phi(x)
    }
}

impl<T: FieldSampler + ?Sized> FieldSampler for &T {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        (**self).sample(x)
    }
    fn axis(&self, x: &Vec3) -> Option<Vec3> {
        (**self).axis(x)
    }
    fn phi(&self, x: &Vec3) -> Option<Vec3> {
        (**self).phi(x)
    }
    fn features(&self) -> Vec<Feature> {
        (**self).features()
    }
    fn candidate_singularities(&self) -> Vec<Vec3> {
        (**self).candidate_singularities()
    }
}

/// `φ(x,y,z) = (−x,−y,z)` with `n ≡ e₃`: the zero-energy reference state.
#[derive(Clone, Copy, Debug, Default)]
pub struct RigidBase;

impl FieldSampler for RigidBase {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        Some((Vec3::new(-x.x, -x.y, x.z), Vec3::z()))
    }
}

/// Constant `(φ, n)`.
#[derive(Clone, Copy, Debug)]
pub struct Constant {
    pub phi: Vec3,
    pub n: Vec3,
}

impl Constant {
    /// `φ ≡ 0`, `n ≡ e₃`.
    pub fn rigid() -> Self {
        Constant { phi: Vec3::zeros(), n: Vec3::z() }
    }
}

impl FieldSampler for Constant {
    fn sample(&self, _: &Vec3) -> Option<(Vec3, Vec3)> {
        Some((self.phi, self.n))
    }
}

/// `n(x) = (x − a)/|x − a|`, `φ = id`.
#[derive(Clone, Copy, Debug)]
pub struct Hedgehog {
    pub center: Vec3,
}

impl FieldSampler for Hedgehog {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        let v = x - self.center;
        let r = v.norm();
        if r == 0.0 {
            return Some((*x, Vec3::z()));
        }
        Some((*x, v / r))
    }

    fn candidate_singularities(&self) -> Vec<Vec3> {
        vec![self.center]
    }
}

/// Direction of the field of two point charges at `p` and `n`:
/// `(x−p)/|x−p|³ + s·(x−n)/|x−n|³` with `s = −1` (opposite charges, a dipole)
/// or `s = +1` (equal charges).
#[derive(Clone, Copy, Debug)]
pub struct TwoCharge {
    pub p: Vec3,
    pub n: Vec3,
    pub sign: f64,
}

impl TwoCharge {
    pub fn dipole(p: Vec3, n: Vec3) -> Self {
        TwoCharge { p, n, sign: -1.0 }
    }

    pub fn equal(p: Vec3, n: Vec3) -> Self {
        TwoCharge { p, n, sign: 1.0 }
    }
}

impl FieldSampler for TwoCharge {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        let u = x - self.p;
        let v = x - self.n;
        let (ru, rv) = (u.norm(), v.norm());
        if ru == 0.0 || rv == 0.0 {
            return Some((*x, Vec3::z()));
        }
        let w = u / (ru * ru * ru) + v * (self.sign / (rv * rv * rv));
        let norm = w.norm();
        Some((*x, if norm > 0.0 { w / norm } else { Vec3::z() }))
    }
}

/// Wraps a closure `x ↦ (φ, n)`.
pub struct FnSampler<F>(pub F);

impl<F> FieldSampler for FnSampler<F>
where
    F: Fn(&Vec3) -> Option<(Vec3, Vec3)> + Sync,
{
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        (self.0)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridDomain, Shape};
    use approx::assert_relative_eq;

    #[test]
    fn feature_distance_interpolates_thickness() {
        let f = Feature { a: Vec3::zeros(), b: Vec3::new(0.0, 0.0, 2.0), thickness_a: 0.0, thickness_b: 1.0 };
        let (d, t) = f.distance(&Vec3::new(1.0, 0.0, 1.0));
        assert_relative_eq!(d, 1.0);
        assert_relative_eq!(t, 0.5);
        assert_relative_eq!(f.distance(&Vec3::new(0.0, 0.0, 5.0)).0, 3.0);
    }

    #[test]
    fn grid_sampler_reproduces_nodes() {
        let d = GridDomain::new(Shape::Box { min: [0.0; 3], max: [1.0; 3] }, 0.25).unwrap();
        let f = CosseratField::from_fn(d, |x| (x * 2.0, Vec3::x()));
        let (phi, n) = f.sample(&Vec3::new(0.5, 0.25, 0.75)).unwrap();
        assert_relative_eq!(phi, Vec3::new(1.0, 0.5, 1.5), epsilon = 1e-14);
        assert_relative_eq!(n.x.abs(), 1.0, epsilon = 1e-14);
        assert!(f.sample(&Vec3::new(1.5, 0.0, 0.0)).is_none());
    }

    #[test]
    fn two_charge_dipole_points_from_p_to_n_between_them() {
        let s = TwoCharge::dipole(Vec3::zeros(), Vec3::z());
        let n = s.axis(&Vec3::new(0.0, 0.0, 0.5)).unwrap();
        assert_relative_eq!(n, Vec3::z(), epsilon = 1e-14);
    }
}
