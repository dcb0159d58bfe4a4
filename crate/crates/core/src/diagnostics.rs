//! Slice diagnostics on the unit ball: low-energy horizontal discs between
//! the dipole heights, degrees on slice boundaries, singularity counts and
//! the energy audit of a minimizer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryDataSpec;
use crate::degree::{probe_surface, ProbeOptions};
use crate::error::{Error, Result};
use crate::grid::CosseratField;
use crate::mesh::TriMesh;
use crate::sampler::{Feature, FieldSampler};
use crate::singular::{find_singularities, SingularPoint};
use crate::so3::{cover_differential_unchecked, Vec3};
use crate::surface::{cell_data, PlaneFrame, SurfacePatch};

/// The grid field inside the ball and an analytic trace on the sphere.
pub struct SliceSampler<'a, T> {
    pub field: &'a CosseratField,
    pub trace: &'a T,
}

impl<T: FieldSampler> FieldSampler for SliceSampler<'_, T> {
    fn sample(&self, x: &Vec3) -> Option<(Vec3, Vec3)> {
        if x.norm() >= 1.0 - 1e-9 {
            self.trace.sample(x)
        } else {
            self.field.sample(x)
        }
    }

    fn features(&self) -> Vec<Feature> {
        self.trace.features()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceConfig {
    /// Threshold for the Jacobian integral; `2π` is the natural measure of
    /// the 180° rotations, `16π` the one induced by the Frobenius metric.
    pub jacobian_threshold: f64,
    pub disc_threshold: f64,
    /// Probe radius for singularity detection, in units of `h`.
    pub probe_radius_h: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig { jacobian_threshold: 2.0 * PI, disc_threshold: 4.0 * PI, probe_radius_h: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub mu_levels: Vec<f64>,
    /// `∫|DR|²` over each disc.
    pub disc_energies: Vec<f64>,
    pub disc_threshold: f64,
    /// Mod-2 degree of `R` on the boundary of each slice.
    pub disc_degrees: Vec<u8>,
    pub slice_lift_degrees: Vec<i64>,
    /// Direct `∫ Jac(R|D)` over each disc.
    pub jacobian_areas: Vec<f64>,
    /// `½∫|DR_tangential|²`, an upper bound for the Jacobian integral.
    pub jacobian_bounds: Vec<f64>,
    pub jacobian_threshold: f64,
    pub singularities_per_slice: Vec<usize>,
    pub odd_singularities_per_slice: Vec<usize>,
    pub singularities: Vec<SingularPoint>,
}

/// Energy and Jacobian integrals over the horizontal unit-ball disc at height `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscMeasures {
    pub z: f64,
    pub energy: f64,
    pub jacobian: f64,
}

pub fn disc_measures<S: FieldSampler + ?Sized>(sampler: &S, z: f64, h: f64) -> Result<DiscMeasures> {
    if z.abs() >= 1.0 {
        return Err(Error::OutsideDomain(format!("plane z = {z} misses the ball")));
    }
    let rho = (1.0 - z * z).sqrt() * (1.0 - 1e-9);
    let n_r = ((rho / h).ceil() as usize).max(4);
    let radii: Vec<f64> = (0..=n_r).map(|i| rho * i as f64 / n_r as f64).collect();
    let n_phi = ((2.0 * PI * rho / h).ceil() as usize).clamp(16, 2048);
    let frame = PlaneFrame::new(Vec3::new(0.0, 0.0, z), Vec3::x(), Vec3::y());
    let patch = SurfacePatch::polar_disc(&frame, &radii, n_phi);
    let values = patch.sample(sampler)?;
    let mut energy = 0.0;
    let mut jacobian = 0.0;
    for cell in cell_data(&patch, &values)? {
        let (du, dv): (Vec3, Vec3) = (cell.dn.column(0).into(), cell.dn.column(1).into());
        let dr2: f64 = [du, dv].iter().map(|v| cover_differential_unchecked(&cell.n, v).norm_squared()).sum();
        energy += dr2 * cell.area;
        jacobian += 8.0 * cell.n.dot(&du.cross(&dv)).abs() * cell.area;
    }
    Ok(DiscMeasures { z, energy, jacobian })
}

/// Admissible height intervals for the discs: `(0, λ₁)`, `(λᵢ, λᵢ₊₁)`, `(λ_N, 1)`,
/// each shrunk away from the tubes around the dipoles.
pub fn bands(spec: &BoundaryDataSpec, h: f64) -> Vec<(f64, f64)> {
    let e = spec.epsilon;
    let n = spec.n_target;
    let top = |i: usize| spec.lambda(i) * (1.0 + e) + e + h;
    let bottom = |i: usize| spec.lambda(i) * (1.0 - e) - e - h;
    let mut out = vec![(h, bottom(1))];
    for i in 1..n {
        out.push((top(i), bottom(i + 1)));
    }
    out.push((top(n), 1.0 - 2.0 * h));
    out
}

/// Height in the band with the smallest disc energy, scanning at step `h`.
pub fn best_disc<S: FieldSampler + ?Sized>(sampler: &S, band: usize, lo: f64, hi: f64, h: f64) -> Result<DiscMeasures> {
    if hi <= lo {
        return Err(Error::NoAdmissibleDisc { band, best: f64::INFINITY });
    }
    let steps = ((hi - lo) / h).floor() as usize;
    let mut best: Option<DiscMeasures> = None;
    for k in 0..=steps {
        let z = if steps == 0 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / steps as f64 };
        let m = disc_measures(sampler, z, h)?;
        if best.is_none_or(|b| m.energy < b.energy) {
            best = Some(m);
        }
    }
    best.ok_or(Error::NoAdmissibleDisc { band, best: f64::INFINITY })
}

/// Lift degree of `R` on the boundary of `{z_lo < z < z_hi} ∩ B³`.
pub fn slice_degree<S: FieldSampler + ?Sized>(sampler: &S, z_lo: f64, z_hi: f64, h: f64, opts: &ProbeOptions) -> Result<i64> {
    let k = ((2.0 * PI / h).ceil() as usize).clamp(24, 1024);
    let radial = ((1.0 / h).ceil() as usize).max(4);
    let band = (((z_lo.acos() - z_hi.acos()) / h).ceil() as usize).max(4);
    let mesh = TriMesh::slice_boundary(Vec3::zeros(), 1.0, z_lo, z_hi, k, radial, band);
    Ok(probe_surface(sampler, mesh, 0, None, opts)?.degree)
}

/// Mod-2 degrees on the slice boundaries for fixed disc heights.
pub fn slice_degrees<T: FieldSampler>(field: &CosseratField, trace: &T, levels: &[f64], opts: &ProbeOptions) -> Result<Vec<u8>> {
    let s = SliceSampler { field, trace };
    levels.windows(2).map(|w| Ok(slice_degree(&s, w[0], w[1], field.domain.h, opts)?.rem_euclid(2) as u8)).collect()
}

pub fn slice_diagnostics<T: FieldSampler>(
    field: &CosseratField,
    spec: &BoundaryDataSpec,
    trace: &T,
    cfg: &SliceConfig,
    opts: &ProbeOptions,
) -> Result<SliceReport> {
    let h = field.domain.h;
    let discs = bands(spec, h)
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| best_disc(field, i, lo, hi, h))
        .collect::<Result<Vec<_>>>()?;
    let mu_levels: Vec<f64> = discs.iter().map(|d| d.z).collect();
    let s = SliceSampler { field, trace };
    let lift: Vec<i64> = mu_levels.windows(2).map(|w| slice_degree(&s, w[0], w[1], h, opts)).collect::<Result<_>>()?;
    let singularities = find_singularities(field, cfg.probe_radius_h * h, opts)?;
    let inside = |p: &SingularPoint, lo: f64, hi: f64| {
        let x = p.position();
        x.z > lo && x.z < hi && x.norm() < 1.0
    };
    let singularities_per_slice = mu_levels.windows(2).map(|w| singularities.iter().filter(|p| inside(p, w[0], w[1])).count()).collect();
    let odd_singularities_per_slice = mu_levels
        .windows(2)
        .map(|w| singularities.iter().filter(|p| inside(p, w[0], w[1]) && p.mod2_degree == Some(1)).count())
        .collect();
    Ok(SliceReport {
        disc_energies: discs.iter().map(|d| d.energy).collect(),
        disc_threshold: cfg.disc_threshold,
        disc_degrees: lift.iter().map(|d| d.rem_euclid(2) as u8).collect(),
        slice_lift_degrees: lift,
        jacobian_areas: discs.iter().map(|d| d.jacobian).collect(),
        jacobian_bounds: discs.iter().map(|d| d.energy / 2.0).collect(),
        jacobian_threshold: cfg.jacobian_threshold,
        mu_levels,
        singularities_per_slice,
        odd_singularities_per_slice,
        singularities,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

/// Pass/fail checks of a minimizer against the forced-singularity argument.
pub fn minimizer_energy_audit(energy: f64, report: &SliceReport, spec: &BoundaryDataSpec) -> AuditReport {
    let budget = spec.budget();
    let n = spec.n_target;
    let mut assertions = vec![Assertion { name: "energy below π/N".into(), passed: energy < budget, measured: energy, threshold: budget }];
    let worst_disc = report.disc_energies.iter().copied().fold(0.0, f64::max);
    assertions.push(Assertion {
        name: format!("{} discs below 4π", n + 1),
        passed: report.disc_energies.len() == n + 1 && worst_disc < report.disc_threshold,
        measured: worst_disc,
        threshold: report.disc_threshold,
    });
    let worst_jac = report.jacobian_areas.iter().copied().fold(0.0, f64::max);
    assertions.push(Assertion {
        name: "disc Jacobian integrals below threshold".into(),
        passed: worst_jac < report.jacobian_threshold,
        measured: worst_jac,
        threshold: report.jacobian_threshold,
    });
    let odd_slices = report.disc_degrees.iter().filter(|&&d| d == 1).count();
    assertions.push(Assertion {
        name: "slice mod-2 degree 1 on every slice".into(),
        passed: odd_slices == n && report.disc_degrees.len() == n,
        measured: odd_slices as f64,
        threshold: n as f64,
    });
    let covered = report.odd_singularities_per_slice.iter().filter(|&&c| c >= 1).count();
    assertions.push(Assertion {
        name: "a singularity of mod-2 degree 1 in every slice".into(),
        passed: covered == n,
        measured: covered as f64,
        threshold: n as f64,
    });
    let passed = assertions.iter().all(|a| a.passed);
    AuditReport { assertions, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::thm1_boundary_data;
    use crate::grid::{GridDomain, Shape};
    use crate::sampler::{FnSampler, RigidBase};
    use crate::so3::MaterialConstants;
    use approx::assert_relative_eq;

    #[test]
    fn jacobian_of_a_degree_one_disc_map() {
        // n(x) = stereographic image covers the upper hemisphere once on the unit disc
        let s = FnSampler(|x: &Vec3| {
            let (u, v) = (x.x, x.y);
            let r2 = u * u + v * v;
            Some((*x, Vec3::new(2.0 * u, 2.0 * v, 1.0 - r2) / (1.0 + r2)))
        });
        let m = disc_measures(&s, 0.0, 1.0 / 128.0).unwrap();
        // area of the upper hemisphere, times the √8² area factor
        assert_relative_eq!(m.jacobian, 8.0 * 2.0 * PI, max_relative = 1e-3);
        // conformal map: Jacobian equals half the Dirichlet energy
        assert_relative_eq!(m.jacobian, m.energy / 2.0, max_relative = 1e-3);
    }

    #[test]
    fn rigid_state_diagnostics() {
        let d = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 16.0).unwrap();
        let f = CosseratField::rigid_base(d);
        let spec = BoundaryDataSpec::new(1, 1e-3);
        let r = slice_diagnostics(&f, &spec, &RigidBase, &SliceConfig::default(), &ProbeOptions::default()).unwrap();
        assert_eq!(r.mu_levels.len(), 2);
        assert!(r.disc_energies.iter().all(|&e| e == 0.0));
        assert_eq!(r.disc_degrees, vec![0]);
        assert!(r.singularities.is_empty());
        let audit = minimizer_energy_audit(0.0, &r, &spec);
        assert!(audit.assertions[0].passed && audit.assertions[1].passed);
    }

    #[test]
    fn unminimized_boundary_data_has_odd_slices() {
        let spec = BoundaryDataSpec::new(2, 1e-3);
        let data = thm1_boundary_data(&spec, &MaterialConstants::unit()).unwrap();
        let g = data.grid(1.0 / 16.0).unwrap();
        let r = slice_diagnostics(&g, &spec, &data.field, &SliceConfig::default(), &ProbeOptions::default()).unwrap();
        assert_eq!(r.disc_degrees, vec![1, 1]);
        for w in r.mu_levels.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn audit_flags_excess_energy() {
        let spec = BoundaryDataSpec::new(1, 1e-3);
        let r = SliceReport {
            mu_levels: vec![0.2, 0.8],
            disc_energies: vec![0.0, 0.0],
            disc_threshold: 4.0 * PI,
            disc_degrees: vec![1],
            slice_lift_degrees: vec![1],
            jacobian_areas: vec![0.0, 0.0],
            jacobian_bounds: vec![0.0, 0.0],
            jacobian_threshold: 2.0 * PI,
            singularities_per_slice: vec![0],
            odd_singularities_per_slice: vec![0],
            singularities: vec![],
        };
        let a = minimizer_energy_audit(4.0, &r, &spec);
        assert!(!a.passed);
        assert!(!a.assertions[0].passed);
        assert!(a.assertions[1].passed);
    }
}
