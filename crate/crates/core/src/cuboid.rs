//! Dipole insertion along a segment: cube chain, radial retraction, bubbles
//! on the shared faces, and the energy and degree bookkeeping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{bubble_radii, Bubble};
use crate::degree::{map_degree_phi, probe_surface, ProbeOptions};
use crate::error::{Error, Result};
use crate::grid::{CosseratField, EnergyReport, RegionEnergy, Shape};
use crate::mesh::TriMesh;
use crate::sampler::{Feature, FieldSampler};
use crate::singular::{is_singular, verify_dipole, DipoleRecord};
use crate::so3::{any_orthogonal, canonical_sign, cover_differential_unchecked, cover_matrix, p_operator, Mat3, MaterialConstants, Vec3};
use crate::surface::{cell_data, PlaneFrame, SurfacePatch};

/// The cube chain `K_m` around `[P, N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CuboidDecomposition {
    pub p: Vec3,
    pub n: Vec3,
    pub d: f64,
    pub m: usize,
    pub a: f64,
    /// Columns are the local axes in world coordinates; the third is `(N − P)/d`.
    pub frame: Mat3,
    pub centers: Vec<Vec3>,
}

impl CuboidDecomposition {
    pub fn new(p: Vec3, n: Vec3, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("the cube chain needs m ≥ 2".into()));
        }
        let d = (n - p).norm();
        if !(d > 0.0) {
            return Err(Error::InvalidInput("dipole endpoints coincide".into()));
        }
        let ez = (n - p) / d;
        let ex = any_orthogonal(&ez);
        let ey = ez.cross(&ex);
        let frame = Mat3::from_columns(&[ex, ey, ez]);
        let a = d / (2.0 * (m as f64 - 1.0));
        let centers = (0..m).map(|j| p + ez * (2.0 * j as f64 * a)).collect();
        Ok(CuboidDecomposition { p, n, d, m, a, frame, centers })
    }

    pub fn to_local(&self, x: &Vec3) -> Vec3 {
        self.frame.transpose() * (x - self.p)
    }

    pub fn to_world(&self, y: &Vec3) -> Vec3 {
        self.p + self.frame * y
    }

    pub fn contains_local(&self, y: &Vec3) -> bool {
        y.x.abs() <= self.a && y.y.abs() <= self.a && y.z >= -self.a && y.z <= self.d + self.a
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.contains_local(&self.to_local(x))
    }

    /// Index of the cube holding a local point of `K_m`.
    pub fn cube_of(&self, y: &Vec3) -> usize {
        ((y.z / (2.0 * self.a)).round().max(0.0) as usize).min(self.m - 1)
    }

    pub fn center_local(&self, j: usize) -> Vec3 {
        Vec3::new(0.0, 0.0, 2.0 * j as f64 * self.a)
    }

    /// Center of the face shared by cubes `j` and `j + 1`.
    pub fn face_center(&self, j: usize) -> Vec3 {
        self.to_world(&Vec3::new(0.0, 0.0, (2.0 * j as f64 + 1.0) * self.a))
    }

    pub fn corners(&self) -> Vec<Vec3> {
        let a = self.a;
        let mut out = Vec::with_capacity(8);
        for z in [-a, self.d + a] {
            for y in [-a, a] {
                for x in [-a, a] {
                    out.push(self.to_world(&Vec3::new(x, y, z)));
                }
            }
        }
        out
    }

    /// Hausdorff distance between `K_m` and `[P, N]`: attained at a corner.
    pub fn hausdorff(&self) -> f64 {
        let seg = self.n - self.p;
        self.corners()
            .iter()
            .map(|x| {
                let t = ((x - self.p).dot(&seg) / seg.norm_squared()).clamp(0.0, 1.0);
                (x - (self.p + seg * t)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest distance from the segment to the boundary of a shape.
    pub fn clearance(&self, shape: &Shape) -> f64 {
        match *shape {
            Shape::Ball { center, radius } => {
                let c = Vec3::from(center);
                radius - (self.p - c).norm().max((self.n - c).norm())
            }
            Shape::Box { min, max } | Shape::Cuboid { min, max } => [self.p, self.n]
                .iter()
                .flat_map(|x| (0..3).flat_map(move |k| [x[k] - min[k], max[k] - x[k]]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// The field `f_{m,α} ∘ π` on `K_m` and the base field elsewhere.
#[derive(Clone, Debug)]
pub struct DipoleField<S> {
    pub base: S,
    pub dec: CuboidDecomposition,
    pub alpha: f64,
    /// Bubble `j` sits on the face shared by cubes `j` and `j + 1`.
    pub bubbles: Vec<Bubble>,
    /// Sheet of the base lift used inside `K_m`.
    pub reference: Vec3,
}

/// Default bubble radius `a_m/8`.
pub fn default_alpha(d: f64, m: usize) -> f64 {
    d / (2.0 * (m as f64 - 1.0)) / 8.0
}

impl<S: FieldSampler> DipoleField<S> {
    /// Builds the construction over an analytic or sampled base field.
    pub fn new(base: S, p: Vec3, n: Vec3, m: usize, alpha: f64) -> Result<Self> {
        let dec = CuboidDecomposition::new(p, n, m)?;
        if !(alpha > 0.0) || alpha >= dec.a / 2.0 {
            return Err(Error::AlphaTooLarge { alpha, limit: dec.a / 2.0, measured: None });
        }
        let mid = (p + n) * 0.5;
        let reference = canonical_sign(base.axis(&mid).ok_or_else(|| Error::OutsideDomain("segment midpoint".into()))?);
        let mut field = DipoleField { base, dec, alpha, bubbles: Vec::new(), reference };
        let (ex, ey) = (field.dec.frame.column(0).into(), field.dec.frame.column(1).into());
        for j in 0..m - 1 {
            let center = field.dec.face_center(j);
            let frame = PlaneFrame::new(center, ex, ey);
            let n_center = field.lifted_base(&center)?;
            let bubble = Bubble::new(frame, alpha, &n_center, None);
            bubble.check_annulus(|x| field.lifted_base(x).ok())?;
            field.bubbles.push(bubble);
        }
        Ok(field)
    }

    fn lifted_base(&self, x: &Vec3) -> Result<Vec3> {
        let n = self.base.axis(x).ok_or_else(|| Error::OutsideDomain(format!("base field at {x:?}")))?;
        Ok(if n.dot(&self.reference) < 0.0 { -n } else { n })
    }

    /// Boundary field of cube `j` at the local boundary point `b`.
    fn boundary_value(&self, j: usize, b: &Vec3) -> Option<(Vec3, Vec3)> {
        let xb = self.dec.to_world(b);
        let (phi, _) = self.base.sample(&xb)?;
        let n = self.lifted_base(&xb).ok()?;
        let c = self.dec.center_local(j);
        let w = b - c;
        if w.z.abs() >= w.x.abs().max(w.y.abs()) {
            let face = if w.z > 0.0 { (j + 1 < self.dec.m).then_some(j) } else { j.checked_sub(1) };
            if let Some(k) = face {
                if let Some(res) = self.bubbles[k].blend(b.x, b.y, &n) {
                    return res.ok().map(|m| (phi, m));
                }
            }
        }
        Some((phi, n))
    }

    /// Value at a local point of cube `j`, by radial retraction onto its boundary.
    pub fn value_in_cube(&self, j: usize, y: &Vec3) -> Option<(Vec3, Vec3)> {
        let c = self.dec.center_local(j);
        let w = y - c;
        let inf = w.x.abs().max(w.y.abs()).max(w.z.abs());
        let b = if inf == 0.0 { c + Vec3::new(0.0, 0.0, self.dec.a) } else { c + w * (self.dec.a / inf) };
        self.boundary_value(j, &b)
    }

    /// Singular points `c_j` followed by the shared face centers.
    pub fn control_points(&self) -> Vec<Vec3> {
        (0..self.dec.m - 1).map(|j| self.dec.face_center(j)).collect()
    }
}

impl<S: FieldSampler> FieldSampler for DipoleField<S> {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        let y = self.dec.to_local(x);
        if !self.dec.contains_local(&y) {
            return self.base.sample(x);
        }
        self.value_in_cube(self.dec.cube_of(&y), &y)
    }

    fn features(&self) -> Vec<Feature> {
        let mut out = self.base.features();
        let a2 = self.alpha * self.alpha;
        for (j, b) in self.bubbles.iter().enumerate() {
            let f = b.frame.origin;
            out.push(Feature { a: self.dec.centers[j], b: f, thickness_a: 0.0, thickness_b: a2 });
            out.push(Feature { a: self.dec.centers[j + 1], b: f, thickness_a: 0.0, thickness_b: a2 });
        }
        out
    }

    fn candidate_singularities(&self) -> Vec<Vec3> {
        let mut out = self.base.candidate_singularities();
        out.extend(self.dec.centers.iter().copied());
        out
    }
}

/// Resolution of the face quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    pub disc_angular: usize,
    pub annulus_radial: usize,
    pub annulus_per_side: usize,
    pub face_cells: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { disc_angular: 512, annulus_radial: 32, annulus_per_side: 32, face_cells: 32 }
    }
}

/// Ray energies and labels of the Step 2 partition.
pub const REGION_LABELS: [&str; 6] = ["ball", "A", "D", "E", "F", "G"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionEnergy {
    /// Totals over `K_m` (or its part inside the clip ball), split by region.
    pub report: EnergyReport,
    /// `(deformation, curvature)` per cube.
    pub per_cube: Vec<(f64, f64)>,
}

fn s_integral(p: f64, s0: f64, s1: f64) -> f64 {
    if (p - 2.0).abs() < 1e-15 {
        return s1 - s0;
    }
    if (p - 3.0).abs() < 1e-15 {
        return if s0 > 0.0 { (s1 / s0).ln() } else { f64::INFINITY };
    }
    let e = 3.0 - p;
    if e < 0.0 && s0 == 0.0 {
        return f64::INFINITY;
    }
    (s1.powf(e) - s0.powf(e)) / e
}

impl<S: FieldSampler> DipoleField<S> {
    /// Energy of the construction over `K_m` by exact integration along the
    /// retraction rays: on the ray `x = c + s·y` (`y` on a face, `s ∈ (0,1]`)
    /// the field is constant and its gradient scales as `1/s`, with
    /// `dx = s²·a ds dS`. With `clip = Some((O, R))` only `B_R(O)` counts.
    pub fn construction_energy(&self, c: &MaterialConstants, q: &QuadratureOptions, clip: Option<(Vec3, f64)>) -> Result<ConstructionEnergy> {
        let m = self.dec.m;
        let per_cube: Result<Vec<[(f64, f64); 6]>> = (0..m).into_par_iter().map(|j| self.cube_energy(j, c, q, clip)).collect();
        let per_cube = per_cube?;
        let mut regions = [(0.0, 0.0); 6];
        for cube in &per_cube {
            for (acc, v) in regions.iter_mut().zip(cube) {
                acc.0 += v.0;
                acc.1 += v.1;
            }
        }
        let report = EnergyReport::from_regions(
            REGION_LABELS
                .iter()
                .zip(regions)
                .map(|(l, (d, k))| RegionEnergy { label: l.to_string(), deformation: d, curvature: k })
                .collect(),
        );
        let per_cube = per_cube
            .iter()
            .map(|r| r.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1)))
            .collect();
        Ok(ConstructionEnergy { report, per_cube })
    }

    fn cube_energy(&self, j: usize, c: &MaterialConstants, q: &QuadratureOptions, clip: Option<(Vec3, f64)>) -> Result<[(f64, f64); 6]> {
        let a = self.dec.a;
        let alpha = self.alpha;
        let center_l = self.dec.center_local(j);
        let center_w = self.dec.to_world(&center_l);
        let pi_norm = p_operator(&Mat3::identity(), c);
        let pi2 = pi_norm.norm_squared();
        let mut acc = [(0.0, 0.0); 6];
        // faces as (local normal, local e1, local e2) with e1 × e2 = normal
        let faces: [(Vec3, Vec3, Vec3); 6] = [
            (Vec3::z(), Vec3::x(), Vec3::y()),
            (-Vec3::z(), Vec3::y(), Vec3::x()),
            (Vec3::x(), Vec3::y(), Vec3::z()),
            (-Vec3::x(), Vec3::z(), Vec3::y()),
            (Vec3::y(), Vec3::z(), Vec3::x()),
            (-Vec3::y(), Vec3::x(), Vec3::z()),
        ];
        for (nu_l, e1_l, e2_l) in faces {
            let bubbled = (nu_l.z > 0.5 && j + 1 < self.dec.m) || (nu_l.z < -0.5 && j > 0);
            let top = nu_l.z > 0.5;
            let fc_l = center_l + nu_l * a;
            let frame = PlaneFrame::new(self.dec.to_world(&fc_l), self.dec.frame * e1_l, self.dec.frame * e2_l);
            let nu_w = self.dec.frame * nu_l;
            let mut patches = Vec::new();
            if bubbled {
                patches.push(SurfacePatch::polar_disc(&frame, &bubble_radii(alpha, alpha), q.disc_angular));
                patches.push(SurfacePatch::square_annulus(&frame, alpha, a, q.annulus_radial, q.annulus_per_side));
            } else {
                let corner = PlaneFrame::new(frame.at(-a, -a), frame.e1, frame.e2);
                patches.push(SurfacePatch::rect(&corner, 2.0 * a, 2.0 * a, q.face_cells, q.face_cells));
            }
            for patch in patches {
                let values: Option<Vec<(Vec3, Vec3)>> =
                    patch.points.par_iter().map(|x| self.boundary_value(j, &self.dec.to_local(x))).collect();
                let values = values.ok_or_else(|| Error::OutsideDomain("cube face".into()))?;
                let cells = cell_data(&patch, &values)?;
                let parts: Vec<[(f64, f64); 6]> = cells
                    .par_iter()
                    .map(|cell| {
                        let mut out = [(0.0, 0.0); 6];
                        let y = cell.mid - center_w;
                        let full = |g: &Mat3| g - (g * y) * nu_w.transpose() / a;
                        let dphi = full(&cell.dphi);
                        let dn = full(&cell.dn);
                        let r = cover_matrix(&cell.n);
                        let dr2: f64 = (0..3).map(|k| cover_differential_unchecked(&cell.n, &dn.column(k).into()).norm_squared()).sum();
                        let curv1 = c.lambda * dr2.powf(c.p / 2.0);
                        let pb = p_operator(&(r.transpose() * dphi), c);
                        let (pb2, pbi) = (pb.norm_squared(), pb.dot(&pi_norm));
                        let (u, v) = frame.coords(&cell.mid);
                        let rr = (u * u + v * v).sqrt();
                        let outer_label = if !bubbled || rr >= alpha {
                            5
                        } else if rr < alpha / 2.0 {
                            if top { 2 } else { 1 }
                        } else if top {
                            4
                        } else {
                            3
                        };
                        let s_ball = (a / y.norm()).min(1.0);
                        let mut spans = vec![(0usize, 0.0, s_ball), (outer_label, s_ball, 1.0)];
                        if let Some((o, rad)) = clip {
                            let (qa, qb, qc) = (y.norm_squared(), 2.0 * y.dot(&(center_w - o)), (center_w - o).norm_squared() - rad * rad);
                            let disc = qb * qb - 4.0 * qa * qc;
                            if disc <= 0.0 {
                                return out;
                            }
                            let (lo, hi) = ((-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa));
                            spans = spans.into_iter().map(|(l, s0, s1)| (l, s0.max(lo), s1.min(hi))).collect();
                        }
                        for (label, s0, s1) in spans {
                            if s1 <= s0 {
                                continue;
                            }
                            let def = a * (pb2 * (s1 - s0) - pbi * (s1 * s1 - s0 * s0) + pi2 * (s1.powi(3) - s0.powi(3)) / 3.0);
                            let curv = a * curv1 * s_integral(c.p, s0, s1);
                            out[label].0 += def * cell.area;
                            out[label].1 += curv * cell.area;
                        }
                        out
                    })
                    .collect();
                for part in parts {
                    for (t, v) in acc.iter_mut().zip(part) {
                        t.0 += v.0;
                        t.1 += v.1;
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Degree bookkeeping for one point of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub location: [f64; 3],
    pub singular: bool,
    pub mod2_degree: Option<u8>,
    pub lift_degree: Option<i64>,
    /// Degree of `φ` around a value outside the image of the probe sphere.
    pub phi_degree_offset: Option<i64>,
    /// Degree of `φ` around the value at the point itself.
    pub phi_degree_center: Option<i64>,
}

/// Degree of the lift on `S²_r(x)` in the gauge of the sampler's own sign.
pub fn gauge_degree<S: FieldSampler + ?Sized>(sampler: &S, x: &Vec3, r: f64, opts: &ProbeOptions) -> Result<i64> {
    let mesh = TriMesh::icosphere(*x, r, opts.icosphere_level);
    let hint = sampler.axis(&mesh.vertices[0]);
    Ok(probe_surface(sampler, mesh, 0, hint, opts)?.degree)
}

impl<S: FieldSampler> DipoleField<S> {
    /// Singularity test and degrees at every `c_j`, plus nonsingularity
    /// controls at the shared face centers.
    pub fn degree_ledger(&self, opts: &ProbeOptions) -> Result<Vec<LedgerEntry>> {
        let a = self.dec.a;
        let r_min = self.alpha * self.alpha / 100.0;
        let mut out = Vec::new();
        for (j, cj) in self.dec.centers.iter().enumerate() {
            let singular = is_singular(self, cj, a / 2.0, r_min, opts)?;
            let lift = gauge_degree(self, cj, a / 2.0, opts)?;
            let phi_c = self.base.phi(cj).ok_or_else(|| Error::OutsideDomain("base φ".into()))?;
            let reach = self
                .dec
                .corners()
                .iter()
                .filter_map(|x| self.base.phi(x))
                .map(|v| (v - phi_c).norm())
                .fold(0.0, f64::max);
            let offset = phi_c + self.dec.frame.column(0) * (2.0 * reach + a);
            out.push(LedgerEntry {
                label: format!("c{j}"),
                location: (*cj).into(),
                singular,
                mod2_degree: Some(lift.rem_euclid(2) as u8),
                lift_degree: Some(lift),
                phi_degree_offset: map_degree_phi(self, cj, a / 2.0, &offset, opts).ok(),
                phi_degree_center: map_degree_phi(self, cj, a / 2.0, &phi_c, opts).ok(),
            });
        }
        for (j, f) in self.control_points().iter().enumerate() {
            let singular = is_singular(self, f, a / 2.0, r_min, opts)?;
            out.push(LedgerEntry {
                label: format!("face{j}"),
                location: (*f).into(),
                singular,
                mod2_degree: None,
                lift_degree: None,
                phi_degree_offset: None,
                phi_degree_center: None,
            });
        }
        Ok(out)
    }
}

/// Everything measured about one construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionManifest {
    pub p: [f64; 3],
    pub n: [f64; 3],
    pub m: usize,
    pub alpha: f64,
    pub a_m: f64,
    pub d: f64,
    pub hausdorff: f64,
    pub energy: ConstructionEnergy,
    /// `2m·a_m·(1 + α²/a_m²)²·64π`, the leading term of the bound.
    pub leading_bound: f64,
    pub degree_ledger: Vec<LedgerEntry>,
    pub dipole: DipoleRecord,
}

impl<S: FieldSampler> DipoleField<S> {
    pub fn manifest(&self, c: &MaterialConstants, q: &QuadratureOptions, opts: &ProbeOptions) -> Result<ConstructionManifest> {
        let a = self.dec.a;
        let energy = self.construction_energy(c, q, None)?;
        let degree_ledger = self.degree_ledger(opts)?;
        let dipole = verify_dipole(self, &self.dec.p, &self.dec.n, 2.0 * a, opts)?;
        let inflation = (1.0 + self.alpha * self.alpha / (a * a)).powi(2);
        Ok(ConstructionManifest {
            p: self.dec.p.into(),
            n: self.dec.n.into(),
            m: self.dec.m,
            alpha: self.alpha,
            a_m: a,
            d: self.dec.d,
            hausdorff: self.dec.hausdorff(),
            energy,
            leading_bound: 2.0 * self.dec.m as f64 * a * inflation * 64.0 * std::f64::consts::PI,
            degree_ledger,
            dipole,
        })
    }
}

/// Inserts a dipole into a grid field: nodes inside `K_m` are resampled from
/// the construction, all others are copied unchanged.
pub fn insert_dipole(f: &CosseratField, p: Vec3, n: Vec3, m: usize, alpha: f64) -> Result<(CosseratField, DipoleField<&CosseratField>)> {
    let dec = CuboidDecomposition::new(p, n, m)?;
    let required = dec.a + alpha;
    let clearance = dec.clearance(&f.domain.shape);
    if clearance < required {
        return Err(Error::SegmentTooClose { clearance, required });
    }
    let dipole = DipoleField::new(f, p, n, m, alpha)?;
    let mut out = f.clone();
    let d = &f.domain;
    let updates: Vec<(usize, (Vec3, Vec3))> = (0..d.node_count())
        .into_par_iter()
        .filter_map(|i| {
            let x = d.position(i);
            if !dipole.dec.contains(&x) {
                return None;
            }
            dipole.sample(&x).map(|v| (i, v))
        })
        .collect();
    for (i, (phi, nv)) in updates {
        out.phi[i] = phi;
        out.n[i] = nv;
    }
    Ok((out, dipole))
}

/// Several constructions over one base; their cube chains must be disjoint.
#[derive(Clone, Debug)]
pub struct DipoleSet<S> {
    pub base: S,
    pub dipoles: Vec<DipoleField<S>>,
}

impl<S: FieldSampler> FieldSampler for DipoleSet<S> {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        for d in &self.dipoles {
            if d.dec.contains(x) {
                return d.sample(x);
            }
        }
        self.base.sample(x)
    }

    fn features(&self) -> Vec<Feature> {
        let mut out = self.base.features();
        for d in &self.dipoles {
            let own = d.features();
            out.extend(own.into_iter().skip(self.base.features().len()));
        }
        out
    }

    fn candidate_singularities(&self) -> Vec<Vec3> {
        self.dipoles.iter().flat_map(|d| d.dec.centers.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::sampler::{Constant, FnSampler, RigidBase};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn decomposition_geometry() {
        let dec = CuboidDecomposition::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 5).unwrap();
        assert_eq!(dec.a, 0.125);
        assert_relative_eq!(dec.centers[4], Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(dec.hausdorff(), 3f64.sqrt() * 0.125, epsilon = 1e-14);
        let tilted = CuboidDecomposition::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.4, -0.1, 0.2), 7).unwrap();
        assert_relative_eq!(tilted.hausdorff(), 3f64.sqrt() * tilted.a, epsilon = 1e-14);
        assert_relative_eq!(tilted.frame.transpose() * tilted.frame, Mat3::identity(), epsilon = 1e-14);
        assert_relative_eq!(tilted.frame.determinant(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn alpha_guard() {
        let a = 1.0 / 6.0;
        assert!(matches!(
            DipoleField::new(RigidBase, Vec3::zeros(), Vec3::new(0.0, 0.0, 0.5), 2, a),
            Err(Error::AlphaTooLarge { .. })
        ));
    }

    #[test]
    fn constant_field_energy_is_volume_times_density() {
        // φ constant: RᵀDφ − I = −I everywhere, density 3
        let f = DipoleField::new(Constant::rigid(), Vec3::zeros(), Vec3::new(0.0, 0.0, 0.6), 4, 0.01).unwrap();
        let e = f.construction_energy(&MaterialConstants::unit(), &QuadratureOptions::default(), None).unwrap();
        let vol = 4.0 * (2.0 * f.dec.a).powi(3);
        assert_relative_eq!(e.report.deformation, 3.0 * vol, max_relative = 1e-3);
    }

    #[test]
    fn radial_energy_matches_volume_quadrature() {
        let base = FnSampler(|x: &Vec3| {
            let phi = Vec3::new(-x.x + 0.1 * x.y.sin(), -x.y, x.z + 0.1 * x.x * x.x);
            Some((phi, Vec3::new(0.3 * x.x, 0.2 * x.y, 1.0).normalize()))
        });
        let alpha = 0.1;
        let f = DipoleField::new(base, Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 2, alpha).unwrap();
        let c = MaterialConstants::unit();
        let radial = f.construction_energy(&c, &QuadratureOptions::default(), None).unwrap();
        let g = radial.report.region("G").unwrap();
        let volume = |h: f64| {
            let d = GridDomain::new(Shape::Box { min: [-0.75, -0.75, -0.75], max: [0.75, 0.75, 1.75] }, h).unwrap();
            let grid = CosseratField::from_fn(d, |x| f.sample(x).unwrap());
            grid.energy_where(&c, |x| {
                let y = f.dec.to_local(x);
                if !f.dec.contains_local(&y) {
                    return false;
                }
                let w = y - f.dec.center_local(f.dec.cube_of(&y));
                if w.norm() <= f.dec.a {
                    return false;
                }
                let inf = w.x.abs().max(w.y.abs());
                w.z.abs() < inf || (w.x * w.x + w.y * w.y).sqrt() * f.dec.a / w.z.abs() >= alpha
            })
        };
        // the masked grid sum converges at first order in h
        let (coarse, fine) = (volume(1.0 / 40.0), volume(1.0 / 80.0));
        assert_relative_eq!(2.0 * fine.deformation - coarse.deformation, g.deformation, max_relative = 0.02);
        assert_relative_eq!(2.0 * fine.curvature - coarse.curvature, g.curvature, max_relative = 0.02);
    }

    #[test]
    fn energy_approaches_sixty_four_pi_d() {
        let d = 0.5;
        let c = MaterialConstants::unit();
        let mut last = f64::INFINITY;
        for m in [4, 8] {
            let f = DipoleField::new(RigidBase, Vec3::zeros(), Vec3::new(0.0, 0.0, d), m, default_alpha(d, m)).unwrap();
            let e = f.construction_energy(&c, &QuadratureOptions::default(), None).unwrap();
            let gap = (e.report.total - 64.0 * PI * d).abs();
            assert!(e.report.total <= 64.0 * PI * d * 1.15);
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn ledger_for_short_chain() {
        let f = DipoleField::new(RigidBase, Vec3::zeros(), Vec3::new(0.0, 0.0, 0.5), 4, default_alpha(0.5, 4)).unwrap();
        let ledger = f.degree_ledger(&ProbeOptions::default()).unwrap();
        let centers: Vec<&LedgerEntry> = ledger.iter().filter(|e| e.label.starts_with('c')).collect();
        assert!(centers.iter().all(|e| e.singular));
        let mod2: Vec<u8> = centers.iter().map(|e| e.mod2_degree.unwrap()).collect();
        assert_eq!(mod2, vec![1, 0, 0, 1]);
        let lift: Vec<i64> = centers.iter().map(|e| e.lift_degree.unwrap()).collect();
        assert_eq!(lift.iter().sum::<i64>(), 0);
        assert_eq!(lift[0], 1);
        assert!(ledger.iter().filter(|e| e.label.starts_with("face")).all(|e| !e.singular));
        assert!(centers.iter().all(|e| e.phi_degree_offset == Some(0)));
    }

    #[test]
    fn manifest_verifies_dipole() {
        let f = DipoleField::new(RigidBase, Vec3::zeros(), Vec3::new(0.3, 0.0, 0.4), 4, default_alpha(0.5, 4)).unwrap();
        let man = f.manifest(&MaterialConstants::unit(), &QuadratureOptions::default(), &ProbeOptions::default()).unwrap();
        assert!(man.dipole.verified, "{:?}", man.dipole.failures);
        assert_eq!(man.dipole.d.map(i64::abs), Some(1));
        assert!(man.energy.report.total <= man.leading_bound);
        let json = serde_json::to_string(&man).unwrap();
        assert_eq!(serde_json::from_str::<ConstructionManifest>(&json).unwrap(), man);
    }

    #[test]
    fn grid_insertion_is_local() {
        let d = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 32.0).unwrap();
        let base = CosseratField::rigid_base(d);
        let (p, n) = (Vec3::new(0.0, 0.0, -0.25), Vec3::new(0.0, 0.0, 0.25));
        let (out, dip) = insert_dipole(&base, p, n, 4, default_alpha(0.5, 4)).unwrap();
        let mut changed = 0;
        for i in 0..base.domain.node_count() {
            if dip.dec.contains(&base.domain.position(i)) {
                changed += 1;
            } else {
                assert_eq!(out.phi[i], base.phi[i]);
                assert_eq!(out.n[i], base.n[i]);
            }
        }
        assert!(changed > 0);
        assert!(matches!(
            insert_dipole(&base, Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, 0.98), 4, 0.001),
            Err(Error::SegmentTooClose { .. })
        ));
    }
}
