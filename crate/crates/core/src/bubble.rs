//! Bubble insertion on a face disc and the cube degree flip.

use serde::{Deserialize, Serialize};

use crate::degree::{probe_surface, ProbeOptions};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sampler::{Feature, FieldSampler};
use crate::so3::{canonical_sign, Mat3, MaterialConstants, Rotation, Vec3};
use crate::surface::{graded_radii, surface_energy, PlaneFrame, SurfacePatch};

/// Inverse stereographic map `z ↦ (2z₁, 2z₂, 1 − |z|²)/(1 + |z|²)`; the far
/// field is the south pole.
pub fn stereo(z1: f64, z2: f64) -> Vec3 {
    let s = z1 * z1 + z2 * z2;
    Vec3::new(2.0 * z1, 2.0 * z2, 1.0 - s) / (1.0 + s)
}

/// `|D(β(·/α²))|²` at distance `r`: `8α⁴/(α⁴ + r²)²`.
pub fn bubble_density(alpha: f64, r: f64) -> f64 {
    let a4 = alpha.powi(4);
    8.0 * a4 / (a4 + r * r).powi(2)
}

/// `∫_{B_ρ} 8α⁴/(α⁴+r²)² = 8π ρ²/(α⁴ + ρ²)`.
pub fn bubble_energy_within(alpha: f64, rho: f64) -> f64 {
    8.0 * std::f64::consts::PI * rho * rho / (alpha.powi(4) + rho * rho)
}

/// Slerp between unit vectors; `None` when they are within about 18° of
/// antipodal, where the geodesic is ill-conditioned.
pub fn slerp(a: &Vec3, b: &Vec3, t: f64) -> Option<Vec3> {
    let d = a.dot(b).clamp(-1.0, 1.0);
    if d < -0.95 {
        return None;
    }
    let theta = d.acos();
    if theta < 1e-9 {
        return Some((a * (1.0 - t) + b * t).normalize());
    }
    let s = theta.sin();
    Some(a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub alpha: f64,
    /// Disc center in face coordinates.
    pub center: [f64; 2],
    /// Rotation applied to the target sphere; by default the one taking the
    /// far-field value onto the face field at the disc center.
    pub orientation: Option<Mat3>,
}

/// A bubble on a planar disc: the face frame's origin is the disc center and
/// `e1 × e2` is the face normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bubble {
    pub frame: PlaneFrame,
    pub alpha: f64,
    /// Columns: the images of the local axes `(e1, e2, ν)` under the orientation.
    pub basis: Mat3,
}

impl Bubble {
    /// Bubble whose far field matches `n_center`, the face field at the disc center.
    pub fn new(frame: PlaneFrame, alpha: f64, n_center: &Vec3, orientation: Option<Mat3>) -> Bubble {
        let local = Mat3::from_columns(&[frame.e1, frame.e2, frame.normal()]);
        let q = orientation.unwrap_or_else(|| *Rotation::between(&-frame.normal(), n_center).matrix());
        Bubble { frame, alpha, basis: q * local }
    }

    /// Pure bubble value at face coordinates `(u, v)`.
    pub fn core(&self, u: f64, v: f64) -> Vec3 {
        let a2 = self.alpha * self.alpha;
        self.basis * stereo(u / a2, v / a2)
    }

    /// Modified value at face coordinates given the unmodified `base`.
    /// `None` outside the disc.
    pub fn blend(&self, u: f64, v: f64, base: &Vec3) -> Option<Result<Vec3>> {
        let r = (u * u + v * v).sqrt();
        if r >= self.alpha {
            return None;
        }
        let b = self.core(u, v);
        if r <= self.alpha / 2.0 {
            return Some(Ok(b));
        }
        let t = 2.0 * r / self.alpha - 1.0;
        let w = t * t * (3.0 - 2.0 * t);
        Some(slerp(&b, base, w).ok_or(Error::AntipodalInterpolation))
    }

    /// Fine-scale structure for probes: the core of radius `α²`.
    pub fn feature(&self) -> Feature {
        Feature::segment(self.frame.origin, self.frame.origin, self.alpha * self.alpha)
    }

    /// Checks the annulus for antipodal pairs on a polar sample grid.
    pub fn check_annulus<F: Fn(&Vec3) -> Option<Vec3>>(&self, base: F) -> Result<()> {
        for i in 0..=16 {
            let r = self.alpha * (0.5 + 0.5 * i as f64 / 16.0) * (1.0 - 1e-12);
            for j in 0..64 {
                let th = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
                let (u, v) = (r * th.cos(), r * th.sin());
                let Some(nb) = base(&self.frame.at(u, v)) else { continue };
                if let Some(res) = self.blend(u, v, &nb) {
                    res?;
                }
            }
        }
        Ok(())
    }
}

/// Face field with a bubble inserted: `n_face` is the (lifted) unit field on
/// the face plane and `frame` the face frame with origin at the face center.
pub fn bubble_insert<F>(n_face: F, frame: &PlaneFrame, params: &BubbleParams) -> Result<BubbledFace<F>>
where
    F: Fn(&Vec3) -> Vec3,
{
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidInput("bubble radius must be positive".into()));
    }
    let center = frame.at(params.center[0], params.center[1]);
    let disc = PlaneFrame::new(center, frame.e1, frame.e2);
    let bubble = Bubble::new(disc, params.alpha, &n_face(&center), params.orientation);
    bubble.check_annulus(|x| Some(n_face(x)))?;
    Ok(BubbledFace { base: n_face, bubble })
}

pub struct BubbledFace<F> {
    pub base: F,
    pub bubble: Bubble,
}

impl<F: Fn(&Vec3) -> Vec3> BubbledFace<F> {
    /// Value at a point of the face plane.
    pub fn value(&self, x: &Vec3) -> Vec3 {
        let base = (self.base)(x);
        let (u, v) = self.bubble.frame.coords(x);
        match self.bubble.blend(u, v, &base) {
            Some(Ok(n)) => n,
            // checked at construction
            Some(Err(_)) | None => base,
        }
    }
}

/// Radii for a polar patch over a bubble disc of outer radius `outer`:
/// uniform `α²/20` across the core, then growing geometrically, with `α/2`
/// and `α` as exact rings.
pub fn bubble_radii(alpha: f64, outer: f64) -> Vec<f64> {
    let a2 = alpha * alpha;
    let mut breaks = vec![a2.min(alpha / 2.0)];
    for b in [alpha / 2.0, alpha, outer] {
        if b > *breaks.last().unwrap() + 1e-15 {
            breaks.push(b);
        }
    }
    graded_radii(&breaks, a2 / 100.0, a2, 1.05, alpha / 64.0)
}

/// A 3D sampler with bubbles inserted on planar discs. Points within `tol`
/// of a bubble plane and inside its disc take the bubbled axis.
pub struct BubbledSampler<S> {
    pub base: S,
    pub bubbles: Vec<Bubble>,
    pub tol: f64,
}

impl<S: FieldSampler> BubbledSampler<S> {
    fn lifted_base(&self, x: &Vec3, b: &Bubble) -> Option<Vec3> {
        let n = self.base.axis(x)?;
        // sign of the lift at the disc center
        let c = self.base.axis(&b.frame.origin)?;
        let far = b.basis * Vec3::new(0.0, 0.0, -1.0);
        let c = if c.dot(&far) < 0.0 { -c } else { c };
        Some(if n.dot(&c) < 0.0 { -n } else { n })
    }
}

impl<S: FieldSampler> FieldSampler for BubbledSampler<S> {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        let (phi, n) = self.base.sample(x)?;
        for b in &self.bubbles {
            if (x - b.frame.origin).dot(&b.frame.normal()).abs() > self.tol {
                continue;
            }
            let (u, v) = b.frame.coords(x);
            let base = self.lifted_base(x, b)?;
            if let Some(res) = b.blend(u, v, &base) {
                return res.ok().map(|m| (phi, m));
            }
        }
        Some((phi, n))
    }

    fn features(&self) -> Vec<Feature> {
        let mut f = self.base.features();
        f.extend(self.bubbles.iter().map(|b| b.feature()));
        f
    }
}

/// Measured surface integrals over a bubble disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscIntegral {
    pub alpha: f64,
    /// `∫ |P(RᵀDφ − I)|²` over `B²_α`.
    pub deformation: f64,
    /// `∫ |DR|²` over `B²_α`.
    pub curvature: f64,
    /// `∫ |DR|²` over `B²_{α/2}`.
    pub curvature_inner: f64,
    /// `2·deformation + curvature`.
    pub total: f64,
}

/// Integrates the bubbled field over `B²_α(center)`.
pub fn disc_integral<S: FieldSampler>(field: &S, bubble: &Bubble, c: &MaterialConstants, n_phi: usize) -> Result<DiscIntegral> {
    let alpha = bubble.alpha;
    let radii = bubble_radii(alpha, alpha);
    let split = radii.iter().position(|&r| r >= alpha / 2.0).unwrap_or(radii.len() - 1);
    let full = SurfacePatch::polar_disc(&bubble.frame, &radii, n_phi);
    let values = full.sample(field)?;
    let e = surface_energy(&full, &values, c, 1.0)?;
    let inner = SurfacePatch::polar_disc(&bubble.frame, &radii[..=split], n_phi);
    let inner_values = values[..inner.points.len()].to_vec();
    let e_inner = surface_energy(&inner, &inner_values, c, 1.0)?;
    Ok(DiscIntegral {
        alpha,
        deformation: e.deformation,
        curvature: e.curvature,
        curvature_inner: e_inner.curvature,
        total: 2.0 * e.deformation + e.curvature,
    })
}

/// Angular resolution of the disc quadrature in the cube flip.
const FLIP_ANGULAR: usize = 256;

/// Cube `[−ν,ν]² × [−2ν,0]` whose top face is centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipCube {
    pub nu: f64,
}

impl FlipCube {
    pub fn center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.nu)
    }

    pub fn top_face(&self) -> PlaneFrame {
        PlaneFrame::new(Vec3::zeros(), Vec3::x(), Vec3::y())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeFlipReport {
    pub nu: f64,
    pub alpha: f64,
    pub disc: DiscIntegral,
    pub budget: f64,
    pub degree_before: i64,
    pub degree_after: i64,
    pub mod2_before: u8,
    pub mod2_after: u8,
}

/// The flipped field: the input with a bubble on the top face.
pub struct CubeFlip<S> {
    pub field: BubbledSampler<S>,
    pub report: CubeFlipReport,
}

fn cube_degree<S: FieldSampler>(field: &S, cube: &FlipCube, opts: &ProbeOptions) -> Result<i64> {
    let mesh = TriMesh::cube(cube.center(), cube.nu, 8);
    Ok(probe_surface(field, mesh, 0, None, opts)?.degree)
}

/// Inserts a bubble at the center of the top face of the cube and measures
/// `∫_{B²_α} 2|P(RᵀDφ − I)|² + |DR|²` against `64π + eps_budget`.
pub fn cube_flip<S: FieldSampler>(
    f: S,
    nu: f64,
    alpha: f64,
    eps_budget: f64,
    c: &MaterialConstants,
    opts: &ProbeOptions,
) -> Result<CubeFlip<S>> {
    let cube = FlipCube { nu };
    if !(alpha > 0.0) || alpha >= nu {
        return Err(Error::AlphaTooLarge { alpha, limit: nu, measured: None });
    }
    let degree_before = cube_degree(&f, &cube, opts)?;
    let face = cube.top_face();
    let n_center = f.axis(&face.origin).ok_or_else(|| Error::OutsideDomain("disc center".into()))?;
    let n_center = canonical_sign(n_center);
    let mut bubble = Bubble::new(face, alpha, &n_center, None);
    let lifted = |x: &Vec3| f.axis(x).map(|n| if n.dot(&n_center) < 0.0 { -n } else { n });
    let mut attempt = 0;
    while let Err(e) = bubble.check_annulus(lifted) {
        attempt += 1;
        if attempt > 3 {
            return Err(e);
        }
        let spin = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(n_center), 0.3 * attempt as f64);
        bubble = Bubble::new(face, alpha, &n_center, Some(spin.matrix() * Rotation::between(&-face.normal(), &n_center).matrix()));
    }
    let field = BubbledSampler { base: f, bubbles: vec![bubble], tol: 1e-12 * nu };
    let disc = disc_integral(&field, &bubble, c, FLIP_ANGULAR)?;
    let budget = 64.0 * std::f64::consts::PI + eps_budget;
    if disc.total >= budget {
        return Err(Error::AlphaTooLarge { alpha, limit: nu, measured: Some(disc.total) });
    }
    let degree_after = cube_degree(&field, &cube, opts)?;
    let report = CubeFlipReport {
        nu,
        alpha,
        disc,
        budget,
        degree_before,
        degree_after,
        mod2_before: degree_before.rem_euclid(2) as u8,
        mod2_after: degree_after.rem_euclid(2) as u8,
    };
    Ok(CubeFlip { field, report })
}

/// Largest `α` in `(0, ν)` whose measured disc integral stays below
/// `64π + eps_budget`, by bisection on `[lo, (1 − 10⁻³)ν]`.
pub fn bisect_alpha0<S: FieldSampler + Clone>(f: &S, nu: f64, eps_budget: f64, c: &MaterialConstants, steps: usize) -> Result<f64> {
    let budget = 64.0 * std::f64::consts::PI + eps_budget;
    let measure = |alpha: f64| -> Result<f64> {
        let face = FlipCube { nu }.top_face();
        let n_center = canonical_sign(f.axis(&face.origin).ok_or_else(|| Error::OutsideDomain("disc center".into()))?);
        let bubble = Bubble::new(face, alpha, &n_center, None);
        let field = BubbledSampler { base: f.clone(), bubbles: vec![bubble], tol: 1e-12 * nu };
        Ok(disc_integral(&field, &bubble, c, FLIP_ANGULAR)?.total)
    };
    let hi_limit = nu * (1.0 - 1e-3);
    if measure(hi_limit)? < budget {
        return Ok(hi_limit);
    }
    let mut lo = nu * 1e-3;
    if measure(lo)? >= budget {
        return Err(Error::AlphaTooLarge { alpha: lo, limit: nu, measured: Some(measure(lo)?) });
    }
    let mut hi = hi_limit;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if measure(mid)? < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
