//! Structured surface patches and the surface trace of the Cosserat energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::EnergyReport;
use crate::sampler::FieldSampler;
use crate::so3::{cosserat_density, cover_differential_unchecked, cover_matrix, Mat3, MaterialConstants, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Disc,
    Sphere,
    CubeBoundary,
    CylinderBoundary,
    /// An open piece of a larger surface.
    Patch,
}

/// Nodes `X(i, j)` on a `nu × nv` index grid; cells are the index squares.
#[derive(Clone, Debug)]
pub struct SurfacePatch {
    pub nu: usize,
    pub nv: usize,
    pub points: Vec<Vec3>,
    pub topology: Topology,
}

/// Orthonormal frame of a planar piece: origin and in-plane axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl PlaneFrame {
    pub fn new(origin: Vec3, e1: Vec3, e2: Vec3) -> Self {
        PlaneFrame { origin, e1, e2 }
    }

    pub fn normal(&self) -> Vec3 {
        self.e1.cross(&self.e2)
    }

    pub fn at(&self, u: f64, v: f64) -> Vec3 {
        self.origin + self.e1 * u + self.e2 * v
    }

    /// In-plane coordinates of the projection of `x`.
    pub fn coords(&self, x: &Vec3) -> (f64, f64) {
        let d = x - self.origin;
        (d.dot(&self.e1), d.dot(&self.e2))
    }
}

/// Radii from 0 to `breaks.last()`: uniform steps `h0` up to `uniform_until`,
/// then steps growing by `ratio` and capped at `max_step`, hitting every break exactly.
pub fn graded_radii(breaks: &[f64], h0: f64, uniform_until: f64, ratio: f64, max_step: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut r = 0.0;
    let mut step = h0;
    for &b in breaks {
        while r < b - 1e-12 * b.max(1.0) {
            let s = if r < uniform_until { h0 } else { step.min(max_step) };
            let mut next = r + s;
            // avoid a sliver before the break
            if next > b - 0.3 * s {
                next = b;
            }
            r = next;
            out.push(r);
            if r >= uniform_until {
                step = (step * ratio).min(max_step);
            }
        }
    }
    out
}

impl SurfacePatch {
    pub fn new(nu: usize, nv: usize, points: Vec<Vec3>, topology: Topology) -> Result<Self> {
        if nu < 2 || nv < 2 || points.len() != nu * nv {
            return Err(Error::InvalidInput("surface patch needs at least 2×2 nodes".into()));
        }
        Ok(SurfacePatch { nu, nv, points, topology })
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        self.points[i * self.nv + j]
    }

    /// Latitude-longitude grid on `S²_r(c)`.
    pub fn sphere(center: Vec3, radius: f64, n_theta: usize, n_phi: usize) -> SurfacePatch {
        let mut pts = Vec::with_capacity((n_theta + 1) * (n_phi + 1));
        for i in 0..=n_theta {
            let th = std::f64::consts::PI * i as f64 / n_theta as f64;
            for j in 0..=n_phi {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                pts.push(center + Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()) * radius);
            }
        }
        SurfacePatch { nu: n_theta + 1, nv: n_phi + 1, points: pts, topology: Topology::Sphere }
    }

    /// Polar grid on a planar disc: rows are the given radii, columns the angles.
    pub fn polar_disc(frame: &PlaneFrame, radii: &[f64], n_phi: usize) -> SurfacePatch {
        let mut pts = Vec::with_capacity(radii.len() * (n_phi + 1));
        for &r in radii {
            for j in 0..=n_phi {
                let ph = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                pts.push(frame.at(r * ph.cos(), r * ph.sin()));
            }
        }
        SurfacePatch { nu: radii.len(), nv: n_phi + 1, points: pts, topology: Topology::Disc }
    }

    /// The square `[−s, s]²` of a frame minus the disc of radius `inner`, on
    /// rays from the center whose angles include the four corners.
    pub fn square_annulus(frame: &PlaneFrame, inner: f64, half: f64, n_radial: usize, per_side: usize) -> SurfacePatch {
        let per_side = per_side.max(1);
        let n_theta = 4 * per_side;
        let mut angles = Vec::with_capacity(n_theta + 1);
        for side in 0..4 {
            let base = -std::f64::consts::FRAC_PI_4 + side as f64 * std::f64::consts::FRAC_PI_2;
            for k in 0..per_side {
                // uniform along the side, not in angle
                let t = -1.0 + 2.0 * k as f64 / per_side as f64;
                angles.push(base + std::f64::consts::FRAC_PI_4 + t.atan());
            }
        }
        angles.push(angles[0] + 2.0 * std::f64::consts::PI);
        let mut pts = Vec::with_capacity((n_radial + 1) * angles.len());
        for i in 0..=n_radial {
            let t = i as f64 / n_radial as f64;
            for &th in &angles {
                let (c, s) = (th.cos(), th.sin());
                let outer = half / c.abs().max(s.abs());
                let r = inner + (outer - inner) * t;
                pts.push(frame.at(r * c, r * s));
            }
        }
        SurfacePatch { nu: n_radial + 1, nv: angles.len(), points: pts, topology: Topology::Patch }
    }

    /// Tensor grid over the rectangle `origin + [0,a]·e1 + [0,b]·e2`.
    pub fn rect(frame: &PlaneFrame, a: f64, b: f64, nu: usize, nv: usize) -> SurfacePatch {
        let mut pts = Vec::with_capacity((nu + 1) * (nv + 1));
        for i in 0..=nu {
            for j in 0..=nv {
                pts.push(frame.at(a * i as f64 / nu as f64, b * j as f64 / nv as f64));
            }
        }
        SurfacePatch { nu: nu + 1, nv: nv + 1, points: pts, topology: Topology::Patch }
    }

    fn cell_geometry(&self, i: usize, j: usize) -> (Vec3, Vec3, f64) {
        let (p00, p10, p01, p11) = (self.point(i, j), self.point(i + 1, j), self.point(i, j + 1), self.point(i + 1, j + 1));
        let xu = ((p10 - p00) + (p11 - p01)) * 0.5;
        let xv = ((p01 - p00) + (p11 - p10)) * 0.5;
        (xu, xv, xu.cross(&xv).norm())
    }

    /// Area weight of every cell, in row-major cell order.
    pub fn area_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity((self.nu - 1) * (self.nv - 1));
        for i in 0..self.nu - 1 {
            for j in 0..self.nv - 1 {
                out.push(self.cell_geometry(i, j).2);
            }
        }
        out
    }

    pub fn area(&self) -> f64 {
        self.area_weights().iter().sum()
    }

    /// Samples `(φ, n)` at every node.
    pub fn sample<S: FieldSampler + ?Sized>(&self, sampler: &S) -> Result<Vec<(Vec3, Vec3)>> {
        self.points
            .par_iter()
            .map(|x| sampler.sample(x).ok_or_else(|| Error::OutsideDomain(format!("surface point {x:?}"))))
            .collect()
    }
}

/// Tangential gradients and midpoint axis of one cell; `None` for cells
/// collapsed to a point or a segment, which carry no area.
fn cell_fields(patch: &SurfacePatch, values: &[(Vec3, Vec3)], i: usize, j: usize) -> Result<Option<(Mat3, Mat3, Vec3, f64)>> {
    let (xu, xv, area) = patch.cell_geometry(i, j);
    let scale = xu.norm_squared().max(xv.norm_squared());
    if area <= 1e-14 * scale {
        if scale == 0.0 || xu.norm_squared() == 0.0 || xv.norm_squared() == 0.0 {
            return Ok(None);
        }
        return Err(Error::DegeneratePatch { i, j });
    }
    let idx = |a: usize, b: usize| (i + a) * patch.nv + (j + b);
    let (f00, f10, f01, f11) = (values[idx(0, 0)], values[idx(1, 0)], values[idx(0, 1)], values[idx(1, 1)]);
    let align = |n: Vec3| if n.dot(&f00.1) < 0.0 { -n } else { n };
    let (n00, n10, n01, n11) = (f00.1, align(f10.1), align(f01.1), align(f11.1));
    let n_mid = {
        let s = n00 + n10 + n01 + n11;
        let len = s.norm();
        if len == 0.0 {
            return Err(Error::DegeneratePatch { i, j });
        }
        s / len
    };
    let phi_u = ((f10.0 - f00.0) + (f11.0 - f01.0)) * 0.5;
    let phi_v = ((f01.0 - f00.0) + (f11.0 - f10.0)) * 0.5;
    // chord differences rescaled to arc length
    let arc = |from: Vec3, to: Vec3| {
        let d = to - from;
        let c = d.norm();
        if c < 1e-12 { d } else { d * (2.0 * (0.5 * c).min(1.0).asin() / c) }
    };
    let n_u = (arc(n00, n10) + arc(n01, n11)) * 0.5;
    let n_v = (arc(n00, n01) + arc(n10, n11)) * 0.5;
    let (guu, guv, gvv) = (xu.dot(&xu), xu.dot(&xv), xv.dot(&xv));
    let det = guu * gvv - guv * guv;
    let (iuu, iuv, ivv) = (gvv / det, -guv / det, guu / det);
    // ∂_τ f = Σ g^{ab} f_a (X_b · τ): dual basis vectors
    let du = xu * iuu + xv * iuv;
    let dv = xu * iuv + xv * ivv;
    let dphi = phi_u * du.transpose() + phi_v * dv.transpose();
    let proj = Mat3::identity() - n_mid * n_mid.transpose();
    let dn = proj * (n_u * du.transpose() + n_v * dv.transpose());
    Ok(Some((dphi, dn, n_mid, area)))
}

/// Midpoint data of one patch cell.
#[derive(Clone, Copy, Debug)]
pub struct CellData {
    pub mid: Vec3,
    /// Tangential `Dφ` (zero normal column).
    pub dphi: Mat3,
    /// Tangential `Dn`, projected onto the tangent plane of `n`.
    pub dn: Mat3,
    pub n: Vec3,
    pub area: f64,
}

/// Per-cell midpoints, tangential gradients and areas, in row-major cell
/// order; collapsed cells are skipped.
pub fn cell_data(patch: &SurfacePatch, values: &[(Vec3, Vec3)]) -> Result<Vec<CellData>> {
    let cells: Vec<(usize, usize)> = (0..patch.nu - 1).flat_map(|i| (0..patch.nv - 1).map(move |j| (i, j))).collect();
    let out: Result<Vec<Option<CellData>>> = cells
        .par_iter()
        .map(|&(i, j)| {
            Ok(cell_fields(patch, values, i, j)?.map(|(dphi, dn, n, area)| {
                let mid = (patch.point(i, j) + patch.point(i + 1, j) + patch.point(i, j + 1) + patch.point(i + 1, j + 1)) * 0.25;
                CellData { mid, dphi, dn, n, area }
            }))
        })
        .collect();
    Ok(out?.into_iter().flatten().collect())
}

/// `Σ (factor · deformation + curvature) · area` over the cells of a patch,
/// using tangential gradients (the normal column of `Dφ` is zero).
pub fn surface_energy(patch: &SurfacePatch, values: &[(Vec3, Vec3)], c: &MaterialConstants, deformation_factor: f64) -> Result<EnergyReport> {
    let cells: Vec<(usize, usize)> = (0..patch.nu - 1).flat_map(|i| (0..patch.nv - 1).map(move |j| (i, j))).collect();
    let parts: Result<Vec<(f64, f64)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let Some((dphi, dn, n, area)) = cell_fields(patch, values, i, j)? else {
                return Ok((0.0, 0.0));
            };
            let r = cover_matrix(&n);
            let dr = [0, 1, 2].map(|k| cover_differential_unchecked(&n, &dn.column(k).into()));
            let (def, curv) = cosserat_density(&dphi, &r, &dr, c);
            Ok((deformation_factor * def * area, curv * area))
        })
        .collect();
    let (mut def, mut curv) = (0.0, 0.0);
    for (a, b) in parts? {
        def += a;
        curv += b;
    }
    Ok(EnergyReport::new(def, curv))
}

/// Largest `|Dn|` over the cells of a patch whose midpoints satisfy `keep`.
pub fn max_tangential_gradient<F: Fn(&Vec3) -> bool>(patch: &SurfacePatch, values: &[(Vec3, Vec3)], keep: F) -> Result<f64> {
    let mut best: f64 = 0.0;
    for i in 0..patch.nu - 1 {
        for j in 0..patch.nv - 1 {
            let mid = (patch.point(i, j) + patch.point(i + 1, j + 1)) * 0.5;
            if !keep(&mid) {
                continue;
            }
            if let Some((_, dn, _, _)) = cell_fields(patch, values, i, j)? {
                best = best.max(dn.norm());
            }
        }
    }
    Ok(best)
}

/// Curvature energy `∫|DR|²` of a field over the disc `{z = z_level} ∩ B_r(c)`.
pub fn disc_energy<S: FieldSampler + ?Sized>(sampler: &S, center: &Vec3, radius: f64, z_level: f64, h: f64) -> Result<f64> {
    let dz = z_level - center.z;
    if dz.abs() >= radius {
        return Err(Error::OutsideDomain(format!("plane z = {z_level} misses the ball")));
    }
    let rho = (radius * radius - dz * dz).sqrt();
    let n_r = ((rho / h).ceil() as usize).max(4);
    let radii: Vec<f64> = (0..=n_r).map(|i| rho * i as f64 / n_r as f64).collect();
    let n_phi = ((2.0 * std::f64::consts::PI * rho / h).ceil() as usize).clamp(16, 2048);
    let frame = PlaneFrame::new(Vec3::new(center.x, center.y, z_level), Vec3::x(), Vec3::y());
    let patch = SurfacePatch::polar_disc(&frame, &radii, n_phi);
    let values = patch.sample(sampler)?;
    let unit = MaterialConstants::unit();
    Ok(surface_energy(&patch, &values, &unit, 0.0)?.curvature)
}
