//! Boundary data on the unit ball forcing `N` singularities: `2N` dipoles
//! straddling the sphere, inserted into the rigid state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cuboid::{ConstructionEnergy, DipoleField, DipoleSet, QuadratureOptions};
use crate::degree::{probe_surface, ProbeOptions};
use crate::error::{Error, Result};
use crate::grid::{CosseratField, GridDomain, Shape};
use crate::mesh::TriMesh;
use crate::sampler::{FieldSampler, RigidBase};
use crate::so3::{MaterialConstants, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDataSpec {
    pub n_target: usize,
    pub epsilon: f64,
    /// Cubes per dipole; even, so the sphere meets a shared face center.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Bubble radius as a fraction of the cube half-width.
    #[serde(default = "default_alpha_ratio")]
    pub alpha_ratio: f64,
}

fn default_m() -> usize {
    4
}

fn default_alpha_ratio() -> f64 {
    0.125
}

/// One dipole of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleSite {
    pub label: char,
    pub index: usize,
    pub p: [f64; 3],
    pub n: [f64; 3],
}

impl BoundaryDataSpec {
    pub fn new(n_target: usize, epsilon: f64) -> Self {
        BoundaryDataSpec { n_target, epsilon, m: default_m(), alpha_ratio: default_alpha_ratio() }
    }

    pub fn lambda(&self, i: usize) -> f64 {
        i as f64 / (2.0 * self.n_target as f64)
    }

    pub fn xi(&self, i: usize) -> Vec3 {
        let l = self.lambda(i);
        Vec3::new(0.0, (1.0 - l * l).sqrt(), l)
    }

    pub fn eta(&self, i: usize) -> Vec3 {
        -self.xi(i)
    }

    /// `(P⁺ᵢ, N⁺ᵢ)` then `(P⁻ᵢ, N⁻ᵢ)` for `i = 1..N`.
    pub fn sites(&self) -> Vec<DipoleSite> {
        let e = self.epsilon;
        let mut out = Vec::with_capacity(2 * self.n_target);
        for i in 1..=self.n_target {
            let (xi, eta) = (self.xi(i), self.eta(i));
            out.push(DipoleSite { label: '+', index: i, p: (xi * (1.0 - e)).into(), n: (xi * (1.0 + e)).into() });
            out.push(DipoleSite { label: '-', index: i, p: (eta * (1.0 + e)).into(), n: (eta * (1.0 - e)).into() });
        }
        out
    }

    /// Smallest z-gap between consecutive tubes of radius `ε`.
    pub fn separation_gap(&self) -> f64 {
        let e = self.epsilon;
        let mut gap = f64::INFINITY;
        for i in 1..self.n_target {
            let (l0, l1) = (self.lambda(i), self.lambda(i + 1));
            gap = gap.min((l1 * (1.0 - e) - e) - (l0 * (1.0 + e) + e));
        }
        // the lowest upper tube against the highest lower one
        let l1 = self.lambda(1);
        gap.min(2.0 * (l1 * (1.0 - e) - e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target == 0 || !(self.epsilon > 0.0) || self.epsilon >= 0.5 {
            return Err(Error::InvalidInput("need N ≥ 1 and 0 < ε < 1/2".into()));
        }
        if self.m < 2 || self.m % 2 == 1 {
            return Err(Error::InvalidInput("m must be even and at least 2".into()));
        }
        if !(self.alpha_ratio > 0.0 && self.alpha_ratio < 0.5) {
            return Err(Error::InvalidInput("alpha_ratio must lie in (0, 1/2)".into()));
        }
        let required = 1.0 / (4.0 * self.n_target as f64);
        let gap = self.separation_gap();
        if gap < required {
            return Err(Error::SeparationViolated { gap, required });
        }
        Ok(())
    }

    pub fn a_m(&self) -> f64 {
        self.epsilon / (self.m as f64 - 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_ratio * self.a_m()
    }

    /// `π/N`.
    pub fn budget(&self) -> f64 {
        PI / self.n_target as f64
    }
}

/// The field `g̃`, analytic, with its energy inside the unit ball.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub spec: BoundaryDataSpec,
    pub field: DipoleSet<RigidBase>,
    pub energy: f64,
    pub per_dipole: Vec<ConstructionEnergy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryManifest {
    pub spec: BoundaryDataSpec,
    pub sites: Vec<DipoleSite>,
    pub a_m: f64,
    pub alpha: f64,
    pub separation_gap: f64,
    pub separation_required: f64,
    pub energy: f64,
    pub budget: f64,
    pub per_dipole_energy: Vec<f64>,
    pub trace_lift_degree: i64,
    pub trace_mod2_degree: u8,
}

/// Builds `g̃` and checks the energy budget `𝒥_{B³}(g̃) < π/N`.
pub fn thm1_boundary_data(spec: &BoundaryDataSpec, c: &MaterialConstants) -> Result<BoundaryData> {
    spec.validate()?;
    let dipoles = spec
        .sites()
        .iter()
        .map(|s| DipoleField::new(RigidBase, Vec3::from(s.p), Vec3::from(s.n), spec.m, spec.alpha()))
        .collect::<Result<Vec<_>>>()?;
    let q = QuadratureOptions::default();
    let per_dipole = dipoles
        .iter()
        .map(|d| d.construction_energy(c, &q, Some((Vec3::zeros(), 1.0))))
        .collect::<Result<Vec<_>>>()?;
    let energy: f64 = per_dipole.iter().map(|e| e.report.total).sum();
    let budget = spec.budget();
    if !(energy < budget) {
        return Err(Error::EpsilonTooLarge { energy, budget, max_epsilon: spec.epsilon * budget / energy });
    }
    Ok(BoundaryData { spec: *spec, field: DipoleSet { base: RigidBase, dipoles }, energy, per_dipole })
}

impl BoundaryData {
    /// Samples `g̃` on a grid over the unit ball; boundary nodes carry the trace.
    pub fn grid(&self, h: f64) -> Result<CosseratField> {
        let domain = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, h)?;
        Ok(CosseratField::from_fn(domain, |x| self.field.sample(x).expect("analytic field is total")))
    }

    /// Lift degree of the trace `g₀` on the unit sphere.
    pub fn trace_degree(&self, opts: &ProbeOptions) -> Result<i64> {
        let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, opts.icosphere_level.max(3));
        Ok(probe_surface(&self.field, mesh, 0, None, opts)?.degree)
    }

    pub fn manifest(&self, opts: &ProbeOptions) -> Result<BoundaryManifest> {
        let deg = self.trace_degree(opts)?;
        Ok(BoundaryManifest {
            spec: self.spec,
            sites: self.spec.sites(),
            a_m: self.spec.a_m(),
            alpha: self.spec.alpha(),
            separation_gap: self.spec.separation_gap(),
            separation_required: 1.0 / (4.0 * self.spec.n_target as f64),
            energy: self.energy,
            budget: self.spec.budget(),
            per_dipole_energy: self.per_dipole.iter().map(|e| e.report.total).collect(),
            trace_lift_degree: deg,
            trace_mod2_degree: deg.rem_euclid(2) as u8,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometry_of_sites() {
        let s = BoundaryDataSpec::new(2, 1e-3);
        let sites = s.sites();
        assert_eq!(sites.len(), 4);
        assert_relative_eq!(Vec3::from(sites[0].p).norm(), 1.0 - 1e-3, epsilon = 1e-14);
        assert_relative_eq!(Vec3::from(sites[1].p).norm(), 1.0 + 1e-3, epsilon = 1e-14);
        assert_relative_eq!(sites[2].p[2], 0.5 * (1.0 - 1e-3), epsilon = 1e-14);
        assert!(s.separation_gap() >= 0.125);
    }

    #[test]
    fn separation_guard() {
        let s = BoundaryDataSpec::new(3, 0.1);
        assert!(matches!(s.validate(), Err(Error::SeparationViolated { .. })));
    }

    #[test]
    fn budget_and_epsilon_guard() {
        let c = MaterialConstants::unit();
        let ok = thm1_boundary_data(&BoundaryDataSpec::new(1, 1e-3), &c).unwrap();
        // each dipole has half its length inside the ball
        assert_relative_eq!(ok.energy, 2.0 * 64.0 * PI * 1e-3, max_relative = 0.05);
        assert!(ok.energy < PI);
        match thm1_boundary_data(&BoundaryDataSpec::new(1, 0.02), &c) {
            Err(Error::EpsilonTooLarge { max_epsilon, energy, .. }) => {
                assert!(energy >= PI);
                assert!(max_epsilon < 0.02 && max_epsilon > 0.005);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_has_degree_zero_and_grid_is_rigid_away_from_tubes() {
        let data = thm1_boundary_data(&BoundaryDataSpec::new(1, 1e-3), &MaterialConstants::unit()).unwrap();
        assert_eq!(data.trace_degree(&ProbeOptions::default()).unwrap(), 0);
        let g = data.grid(1.0 / 16.0).unwrap();
        for i in 0..g.domain.node_count() {
            let x = g.domain.position(i);
            if data.field.dipoles.iter().all(|d| !d.dec.contains(&x)) {
                assert_eq!(g.phi[i], Vec3::new(-x.x, -x.y, x.z));
                assert_eq!(g.n[i], Vec3::z());
            }
        }
    }
}
