//! Structured grids, nodal Cosserat fields and their volume energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{cosserat_density, cover_differential_unchecked, cover_matrix, dominant_axis, Mat3, MaterialConstants, Vec3};

/// Geometry of a domain. Boxes and cuboids differ only by tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: [f64; 3], radius: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
    Cuboid { min: [f64; 3], max: [f64; 3] },
}

impl Shape {
    pub fn tag(&self) -> u8 {
        match self {
            Shape::Ball { .. } => 0,
            Shape::Box { .. } => 1,
            Shape::Cuboid { .. } => 2,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match *self {
            Shape::Ball { center, radius } => {
                let c = Vec3::from(center);
                (c - Vec3::repeat(radius), c + Vec3::repeat(radius))
            }
            Shape::Box { min, max } | Shape::Cuboid { min, max } => (Vec3::from(min), Vec3::from(max)),
        }
    }

    /// Rebuilds a shape from its tag and bounding box.
    pub fn from_tag(tag: u8, min: Vec3, max: Vec3) -> Result<Shape> {
        match tag {
            0 => Ok(Shape::Ball { center: ((min + max) * 0.5).into(), radius: (max.x - min.x) * 0.5 }),
            1 => Ok(Shape::Box { min: min.into(), max: max.into() }),
            2 => Ok(Shape::Cuboid { min: min.into(), max: max.into() }),
            t => Err(Error::Format(format!("unknown shape tag {t}"))),
        }
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        match *self {
            Shape::Ball { center, radius } => (x - Vec3::from(center)).norm() <= radius + tol,
            Shape::Box { min, max } | Shape::Cuboid { min, max } => {
                (0..3).all(|i| x[i] >= min[i] - tol && x[i] <= max[i] + tol)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeClass {
    Outside = 0,
    Interior = 1,
    Boundary = 2,
}

/// A uniform grid over the bounding box of a shape, with each node classified
/// as interior, boundary or outside.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    pub shape: Shape,
    pub origin: Vec3,
    pub h: f64,
    pub dims: [usize; 3],
    pub mask: Vec<NodeClass>,
}

pub const AXES: [usize; 3] = [0, 1, 2];

impl GridDomain {
    /// Builds and classifies the grid. Nodes sit at `origin + h·(i, j, k)`.
    pub fn new(shape: Shape, h: f64) -> Result<GridDomain> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput("grid spacing must be positive".into()));
        }
        let (min, max) = shape.bounding_box();
        let extent = max - min;
        if let Shape::Ball { radius, .. } = shape {
            if !(radius > 0.0) {
                return Err(Error::InvalidInput("ball radius must be positive".into()));
            }
        }
        if extent.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidInput("degenerate domain geometry".into()));
        }
        let cells = extent.min() / h;
        if cells < 4.0 - 1e-9 {
            return Err(Error::ResolutionTooCoarse { cells });
        }
        let mut dims = [0usize; 3];
        for a in AXES {
            dims[a] = (extent[a] / h + 1e-9).floor() as usize + 1;
        }
        let mut domain = GridDomain { shape, origin: min, h, dims, mask: Vec::new() };
        domain.classify();
        Ok(domain)
    }

    /// Reassembles a domain from stored parts (e.g. a field file).
    pub fn from_parts(shape: Shape, h: f64, dims: [usize; 3], mask: Vec<NodeClass>) -> Result<GridDomain> {
        if mask.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Format("mask length does not match node dims".into()));
        }
        let (min, _) = shape.bounding_box();
        Ok(GridDomain { shape, origin: min, h, dims, mask })
    }

    fn classify(&mut self) {
        let tol = 1e-9 * self.h;
        let inside: Vec<bool> = (0..self.node_count())
            .map(|idx| self.shape.contains(&self.position(idx), tol))
            .collect();
        self.mask = (0..self.node_count())
            .map(|idx| {
                if !inside[idx] {
                    return NodeClass::Outside;
                }
                let all_neighbours = AXES.iter().all(|&a| {
                    [-1i64, 1].iter().all(|&s| self.neighbor(idx, a, s).is_some_and(|nb| inside[nb]))
                });
                if all_neighbours {
                    NodeClass::Interior
                } else {
                    NodeClass::Boundary
                }
            })
            .collect();
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.h
    }

    /// Neighbour of `idx` one step along `axis` in direction `step` (±1).
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: i64) -> Option<usize> {
        let c = self.coords(idx);
        let v = c[axis] as i64 + step;
        if v < 0 || v >= self.dims[axis] as i64 {
            return None;
        }
        let stride = match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        };
        Some(if step > 0 { idx + stride } else { idx - stride })
    }

    #[inline]
    pub fn class(&self, idx: usize) -> NodeClass {
        self.mask[idx]
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.mask[idx] != NodeClass::Outside
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.mask[i] == NodeClass::Interior)
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.mask.iter().filter(|c| **c == class).count()
    }

    /// Far corner of the node lattice.
    pub fn lattice_max(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                (self.dims[0] - 1) as f64,
                (self.dims[1] - 1) as f64,
                (self.dims[2] - 1) as f64,
            ) * self.h
    }

    pub fn lattice_contains(&self, x: &Vec3) -> bool {
        let max = self.lattice_max();
        let tol = 1e-12 * self.h;
        (0..3).all(|a| x[a] >= self.origin[a] - tol && x[a] <= max[a] + tol)
    }

    /// Cell base index and trilinear weights for a point inside the lattice.
    pub fn locate(&self, x: &Vec3) -> Option<([usize; 3], [f64; 3])> {
        if !self.lattice_contains(x) {
            return None;
        }
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in AXES {
            let t = (x[a] - self.origin[a]) / self.h;
            let i = (t.floor().max(0.0) as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        Some((base, frac))
    }
}

/// Discrete `(φ, n)` pair on a grid. `R = cover(n)` node-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct CosseratField {
    pub domain: GridDomain,
    pub phi: Vec<Vec3>,
    pub n: Vec<Vec3>,
    pub dirichlet: Vec<bool>,
}

impl CosseratField {
    /// Samples `f(x) = (φ(x), n(x))` at every node, including outside nodes.
    /// Boundary nodes become Dirichlet nodes.
    pub fn from_fn<F>(domain: GridDomain, f: F) -> CosseratField
    where
        F: Fn(&Vec3) -> (Vec3, Vec3) + Sync,
    {
        let samples: Vec<(Vec3, Vec3)> = (0..domain.node_count())
            .into_par_iter()
            .map(|idx| f(&domain.position(idx)))
            .collect();
        let (phi, n): (Vec<Vec3>, Vec<Vec3>) = samples.into_iter().unzip();
        let dirichlet = domain.mask.iter().map(|c| *c == NodeClass::Boundary).collect();
        CosseratField { domain, phi, n, dirichlet }
    }

    /// The zero-energy reference state `φ(x,y,z) = (−x,−y,z)`, `n ≡ e₃`.
    pub fn rigid_base(domain: GridDomain) -> CosseratField {
        CosseratField::from_fn(domain, |x| (Vec3::new(-x.x, -x.y, x.z), Vec3::z()))
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.domain.node_count();
        if self.phi.len() != count || self.n.len() != count || self.dirichlet.len() != count {
            return Err(Error::InvalidInput("field arrays do not match the domain".into()));
        }
        if let Some(i) = self.n.iter().position(|n| (n.norm() - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidUnitVector { norm: self.n[i].norm() });
        }
        if let Some(i) = (0..count).find(|&i| self.dirichlet[i] && self.domain.class(i) != NodeClass::Boundary) {
            return Err(Error::InvalidInput(format!("Dirichlet node {i} is not a boundary node")));
        }
        Ok(())
    }

    /// `(Dφ, Dn)` at a node, columns indexed by coordinate direction. Central
    /// differences where both neighbours are active, one-sided otherwise; the
    /// columns of `Dn` are projected onto the tangent plane at `n(node)`.
    pub fn gradient(&self, node: usize) -> Result<(Mat3, Mat3)> {
        let d = &self.domain;
        if node >= d.node_count() || !d.is_active(node) {
            return Err(Error::OutsideDomain(format!("node {node}")));
        }
        let mut dphi = Mat3::zeros();
        let mut dn = Mat3::zeros();
        let n0 = self.n[node];
        for a in AXES {
            let fwd = d.neighbor(node, a, 1).filter(|&i| d.is_active(i));
            let bwd = d.neighbor(node, a, -1).filter(|&i| d.is_active(i));
            let (p, q, scale) = match (fwd, bwd) {
                (Some(f), Some(b)) => (f, b, 0.5 / d.h),
                (Some(f), None) => (f, node, 1.0 / d.h),
                (None, Some(b)) => (node, b, 1.0 / d.h),
                (None, None) => continue,
            };
            dphi.set_column(a, &((self.phi[p] - self.phi[q]) * scale));
            let raw = (self.n[p] - self.n[q]) * scale;
            dn.set_column(a, &(raw - n0 * n0.dot(&raw)));
        }
        Ok((dphi, dn))
    }

    /// Energy density `(deformation, curvature)` at an interior node.
    pub fn density(&self, node: usize, c: &MaterialConstants) -> (f64, f64) {
        let (dphi, dn) = match self.gradient(node) {
            Ok(g) => g,
            Err(_) => return (0.0, 0.0),
        };
        let n = self.n[node];
        let r = cover_matrix(&n);
        let dr = [
            cover_differential_unchecked(&n, &dn.column(0).into()),
            cover_differential_unchecked(&n, &dn.column(1).into()),
            cover_differential_unchecked(&n, &dn.column(2).into()),
        ];
        cosserat_density(&dphi, &r, &dr, c)
    }

    /// Midpoint quadrature over interior nodes, summed in node order.
    pub fn energy(&self, c: &MaterialConstants) -> EnergyReport {
        self.energy_where(c, |_| true)
    }

    /// Like [`energy`](Self::energy) but only over interior nodes accepted by `keep`.
    pub fn energy_where<F>(&self, c: &MaterialConstants, keep: F) -> EnergyReport
    where
        F: Fn(&Vec3) -> bool + Sync,
    {
        let d = &self.domain;
        let vol = d.h * d.h * d.h;
        let densities: Vec<(f64, f64)> = (0..d.node_count())
            .into_par_iter()
            .map(|i| {
                if d.class(i) == NodeClass::Interior && keep(&d.position(i)) {
                    self.density(i, c)
                } else {
                    (0.0, 0.0)
                }
            })
            .collect();
        let mut def = 0.0;
        let mut curv = 0.0;
        for (a, b) in densities {
            def += a;
            curv += b;
        }
        EnergyReport::new(def * vol, curv * vol)
    }

    /// Trilinear interpolation of φ.
    pub fn interpolate_phi(&self, x: &Vec3) -> Option<Vec3> {
        let (base, w) = self.domain.locate(x)?;
        let mut acc = Vec3::zeros();
        self.for_corners(base, w, |idx, wt| acc += self.phi[idx] * wt);
        Some(acc)
    }

    /// Axis at `x` from trilinear interpolation of the projectors `n⊗n`;
    /// insensitive to the sign of the stored lift.
    pub fn interpolate_axis(&self, x: &Vec3) -> Option<Vec3> {
        let (base, w) = self.domain.locate(x)?;
        let mut q = Mat3::zeros();
        let mut best = (0.0, Vec3::z());
        self.for_corners(base, w, |idx, wt| {
            let n = self.n[idx];
            q += n * n.transpose() * wt;
            if wt > best.0 {
                best = (wt, n);
            }
        });
        // a single dominant corner needs no eigen-solve
        if best.0 > 1.0 - 1e-12 {
            return Some(best.1);
        }
        Some(dominant_axis(&q))
    }

    fn for_corners<G: FnMut(usize, f64)>(&self, base: [usize; 3], w: [f64; 3], mut g: G) {
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let wt = (if dx == 1 { w[0] } else { 1.0 - w[0] })
                        * (if dy == 1 { w[1] } else { 1.0 - w[1] })
                        * (if dz == 1 { w[2] } else { 1.0 - w[2] });
                    if wt == 0.0 {
                        continue;
                    }
                    let idx = self.domain.index(base[0] + dx, base[1] + dy, base[2] + dz);
                    g(idx, wt);
                }
            }
        }
    }
}

/// Energy totals with an optional per-region breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub deformation: f64,
    pub curvature: f64,
    pub total: f64,
    pub per_region: Vec<RegionEnergy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEnergy {
    pub label: String,
    pub deformation: f64,
    pub curvature: f64,
}

impl EnergyReport {
    pub fn new(deformation: f64, curvature: f64) -> Self {
        EnergyReport { deformation, curvature, total: deformation + curvature, per_region: Vec::new() }
    }

    /// Totals are the sums of the regions.
    pub fn from_regions(per_region: Vec<RegionEnergy>) -> Self {
        let deformation = per_region.iter().map(|r| r.deformation).sum();
        let curvature = per_region.iter().map(|r| r.curvature).sum();
        EnergyReport { deformation, curvature, total: deformation + curvature, per_region }
    }

    pub fn region(&self, label: &str) -> Option<&RegionEnergy> {
        self.per_region.iter().find(|r| r.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_ball(h: f64) -> GridDomain {
        GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, h).unwrap()
    }

    #[test]
    fn box_node_counts() {
        let d = GridDomain::new(Shape::Box { min: [-1.0; 3], max: [1.0; 3] }, 0.1).unwrap();
        assert_eq!(d.dims, [21, 21, 21]);
        assert_eq!(d.count(NodeClass::Interior), 19 * 19 * 19);
        assert_eq!(d.count(NodeClass::Boundary), 21 * 21 * 21 - 19 * 19 * 19);
    }

    #[test]
    fn coarse_ball_is_valid() {
        let d = unit_ball(0.5);
        assert!(d.count(NodeClass::Interior) > 0);
        assert!(matches!(
            GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 0.6),
            Err(Error::ResolutionTooCoarse { .. })
        ));
    }

    #[test]
    fn cuboid_for_five_cubes() {
        // unit-length segment split into five cubes: a = 1/(2·4)
        let a = 1.0 / (2.0 * 4.0);
        assert_eq!(a, 0.125);
        let d = GridDomain::new(Shape::Cuboid { min: [-a, -a, -a], max: [a, a, 1.0 + a] }, a / 4.0).unwrap();
        assert_eq!(d.dims, [9, 9, 41]);
    }

    #[test]
    fn interior_neighbours_are_active() {
        let d = unit_ball(0.1);
        for i in d.interior_nodes() {
            for a in AXES {
                for s in [-1, 1] {
                    assert!(d.is_active(d.neighbor(i, a, s).unwrap()));
                }
            }
        }
    }

    #[test]
    fn gradient_of_affine_map_is_exact() {
        let a = Mat3::new(1.0, 2.0, -0.5, 0.3, -1.0, 4.0, 2.0, 0.0, 1.5);
        let field = CosseratField::from_fn(unit_ball(0.125), |x| (a * x + Vec3::new(1.0, 2.0, 3.0), Vec3::z()));
        for i in field.domain.interior_nodes() {
            let (dphi, dn) = field.gradient(i).unwrap();
            assert_relative_eq!(dphi, a, epsilon = 1e-12);
            assert_eq!(dn, Mat3::zeros());
        }
    }

    #[test]
    fn gradient_rejects_outside_nodes() {
        let field = CosseratField::rigid_base(unit_ball(0.25));
        let outside = (0..field.domain.node_count()).find(|&i| !field.domain.is_active(i)).unwrap();
        assert!(matches!(field.gradient(outside), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn hedgehog_gradient_density() {
        // |D(x/|x|)|² = 2/ρ²
        let h = 0.02;
        let d = GridDomain::new(Shape::Box { min: [0.2, 0.2, 0.2], max: [0.6, 0.6, 0.6] }, h).unwrap();
        let field = CosseratField::from_fn(d, |x| (*x, x / x.norm()));
        let node = field.domain.index(10, 10, 10);
        let rho = field.domain.position(node).norm();
        let (_, dn) = field.gradient(node).unwrap();
        assert_relative_eq!(dn.norm_squared(), 2.0 / (rho * rho), max_relative = 2.0 * (h / rho).powi(2));
    }

    #[test]
    fn rigid_base_has_zero_energy() {
        let field = CosseratField::rigid_base(unit_ball(1.0 / 32.0));
        let e = field.energy(&MaterialConstants::unit());
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn identity_map_with_half_turn() {
        // |S - I|² = 8 everywhere
        let field = CosseratField::from_fn(unit_ball(1.0 / 32.0), |x| (*x, Vec3::z()));
        let e = field.energy(&MaterialConstants::unit());
        assert_eq!(e.curvature, 0.0);
        let vol = field.domain.count(NodeClass::Interior) as f64 * (1.0f64 / 32.0).powi(3);
        assert_relative_eq!(e.deformation, 8.0 * vol, max_relative = 1e-12);
        assert_relative_eq!(e.deformation, 8.0 * 4.0 * PI / 3.0, max_relative = 0.1);
    }

    #[test]
    fn hedgehog_shell_curvature() {
        // ∫_{a<|x|<b} 8·2/|x|² dx = 64π(b − a)
        let (a, b) = (0.3, 0.9);
        let field = CosseratField::from_fn(unit_ball(1.0 / 64.0), |x| (*x, x / x.norm().max(1e-300)));
        let e = field.energy_where(&MaterialConstants::unit(), |x| {
            let r = x.norm();
            r > a && r < b
        });
        assert_relative_eq!(e.curvature, 64.0 * PI * (b - a), max_relative = 0.03);
    }

    #[test]
    fn axis_interpolation_ignores_sign() {
        let d = GridDomain::new(Shape::Box { min: [0.0; 3], max: [1.0; 3] }, 0.25).unwrap();
        let q = Vec3::new(0.36, 0.48, 0.8);
        let mut flip = false;
        let field = CosseratField::from_fn(d, |_| (Vec3::zeros(), q));
        let mut f2 = field.clone();
        for n in f2.n.iter_mut() {
            flip = !flip;
            if flip {
                *n = -*n;
            }
        }
        let x = Vec3::new(0.4, 0.1, 0.77);
        assert_relative_eq!(f2.interpolate_axis(&x).unwrap(), q, epsilon = 1e-12);
        assert!(field.interpolate_axis(&Vec3::new(2.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn energy_is_deterministic() {
        let field = CosseratField::from_fn(unit_ball(1.0 / 16.0), |x| {
            let n = Vec3::new(x.y.sin(), x.z.cos(), 1.0 + x.x);
            (x * 1.3, n / n.norm())
        });
        let c = MaterialConstants::unit();
        let a = field.energy(&c);
        let b = field.energy(&c);
        assert_eq!(a.total.to_bits(), b.total.to_bits());
    }
}
