//! The command-line pipeline: configs, commands and the files they write.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::{thm1_boundary_data, BoundaryDataSpec, BoundaryManifest};
use crate::cuboid::{default_alpha, insert_dipole, ConstructionManifest, QuadratureOptions};
use crate::degree::ProbeOptions;
use crate::diagnostics::{minimizer_energy_audit, slice_degrees, slice_diagnostics, AuditReport, SliceConfig, SliceReport};
use crate::error::{Error, Result};
use crate::grid::{CosseratField, EnergyReport, GridDomain, Shape};
use crate::io::{load_field, save_field, save_json, write_vtk};
use crate::minimize::{minimize_with_audit, write_trace, Dirichlet, SolverConfig, StopReason};
use crate::sampler::FieldSampler;
use crate::singular::{find_singularities, verify_dipole, DipoleRecord, SingularPoint};
use crate::so3::{MaterialConstants, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BuildBoundary,
    InsertDipole,
    Energy,
    Minimize,
    Analyze,
    Export,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryParams {
    pub n_target: usize,
    pub epsilon: f64,
    pub m: usize,
    pub alpha_ratio: f64,
    pub h: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        BoundaryParams { n_target: 1, epsilon: 1e-3, m: 4, alpha_ratio: 0.125, h: 1.0 / 32.0 }
    }
}

impl BoundaryParams {
    pub fn spec(&self) -> BoundaryDataSpec {
        BoundaryDataSpec { n_target: self.n_target, epsilon: self.epsilon, m: self.m, alpha_ratio: self.alpha_ratio }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DipoleParams {
    pub p: [f64; 3],
    pub n: [f64; 3],
    pub m: usize,
    /// Defaults to `a_m/8`.
    pub alpha: Option<f64>,
    pub domain: Shape,
    pub h: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for DipoleParams {
    fn default() -> Self {
        DipoleParams {
            p: [0.0, 0.0, -0.25],
            n: [0.0, 0.0, 0.25],
            m: 16,
            alpha: None,
            domain: Shape::Ball { center: [0.0; 3], radius: 1.0 },
            h: 1.0 / 64.0,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// Where the slice diagnostics take boundary values on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    /// The analytic boundary data rebuilt from the `boundary` section.
    Analytic,
    /// The grid field itself.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeParams {
    pub solver: SolverConfig,
    pub slices: SliceConfig,
    pub trace: TraceSource,
    /// Record slice degrees every `solver.audit_every` iterations.
    pub degree_audit: bool,
}

impl Default for MinimizeParams {
    fn default() -> Self {
        MinimizeParams { solver: SolverConfig::default(), slices: SliceConfig::default(), trace: TraceSource::Analytic, degree_audit: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleQuery {
    pub p: [f64; 3],
    pub n: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeParams {
    /// Probe radius in units of `h`.
    pub probe_radius_h: f64,
    pub dipoles: Vec<DipoleQuery>,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        AnalyzeParams { probe_radius_h: 2.0, dipoles: Vec::new() }
    }
}

/// Parameters for every command; each command reads its own sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub constants: MaterialConstants,
    pub probe: ProbeOptions,
    pub boundary: BoundaryParams,
    pub dipole: DipoleParams,
    pub minimize: MinimizeParams,
    pub analyze: AnalyzeParams,
    /// Field file read by `energy`, `minimize`, `analyze` and `export`.
    pub input: Option<PathBuf>,
}


impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }

    fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::InvalidInput("this command needs `input`, a field file".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOutput {
    pub config: RunConfig,
    pub construction: BoundaryManifest,
    pub grid_energy: EnergyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleOutput {
    pub config: RunConfig,
    pub construction: ConstructionManifest,
    pub changed_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyOutput {
    pub config: RunConfig,
    pub energy: EnergyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeAudit {
    pub iteration: usize,
    pub slice_degrees: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutput {
    pub config: RunConfig,
    pub iterations: usize,
    pub stop: StopReason,
    pub initial_energy: EnergyReport,
    pub final_energy: EnergyReport,
    pub slices: SliceReport,
    pub audit: AuditReport,
    pub degree_audits: Vec<DegreeAudit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub config: RunConfig,
    pub singularities: Vec<SingularPoint>,
    pub dipoles: Vec<DipoleRecord>,
}

/// Runs one command, writing its files into `out`; returns the manifest path.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let manifest = out.join("manifest.json");
    match cmd {
        Command::BuildBoundary => {
            let o = build_boundary(cfg, Some(out))?;
            save_json(&o, &manifest)?;
        }
        Command::InsertDipole => {
            let o = insert(cfg, Some(out))?;
            save_json(&o, &manifest)?;
        }
        Command::Energy => {
            let f = load_field(cfg.input()?)?;
            save_json(&EnergyOutput { config: cfg.clone(), energy: f.energy(&cfg.constants) }, &manifest)?;
        }
        Command::Minimize => {
            let f = load_field(cfg.input()?)?;
            let o = minimize(&f, cfg, Some(out))?;
            save_json(&o.slices, &out.join("slices.json"))?;
            save_json(&o, &manifest)?;
        }
        Command::Analyze => {
            let f = load_field(cfg.input()?)?;
            save_json(&analyze(&f, cfg)?, &manifest)?;
        }
        Command::Export => {
            let f = load_field(cfg.input()?)?;
            write_vtk(&f, std::fs::File::create(out.join("field.vtk"))?)?;
            return Ok(out.join("field.vtk"));
        }
    }
    Ok(manifest)
}

pub fn build_boundary(cfg: &RunConfig, out: Option<&Path>) -> Result<BoundaryOutput> {
    let data = thm1_boundary_data(&cfg.boundary.spec(), &cfg.constants)?;
    let grid = data.grid(cfg.boundary.h)?;
    if let Some(dir) = out {
        save_field(&grid, &dir.join("field.csrf"))?;
    }
    Ok(BoundaryOutput { config: cfg.clone(), construction: data.manifest(&cfg.probe)?, grid_energy: grid.energy(&cfg.constants) })
}

pub fn insert(cfg: &RunConfig, out: Option<&Path>) -> Result<DipoleOutput> {
    let p = &cfg.dipole;
    let base = match &cfg.input {
        Some(path) => load_field(path)?,
        None => CosseratField::rigid_base(GridDomain::new(p.domain, p.h)?),
    };
    let (pv, nv) = (Vec3::from(p.p), Vec3::from(p.n));
    let alpha = p.alpha.unwrap_or_else(|| default_alpha((nv - pv).norm(), p.m));
    let (field, dipole) = insert_dipole(&base, pv, nv, p.m, alpha)?;
    let changed_nodes = (0..field.domain.node_count()).filter(|&i| field.phi[i] != base.phi[i] || field.n[i] != base.n[i]).count();
    let construction = dipole.manifest(&cfg.constants, &p.quadrature, &cfg.probe)?;
    if let Some(dir) = out {
        save_field(&field, &dir.join("field.csrf"))?;
    }
    Ok(DipoleOutput { config: cfg.clone(), construction, changed_nodes })
}

fn slice_report<T: FieldSampler>(field: &CosseratField, spec: &BoundaryDataSpec, trace: &T, cfg: &RunConfig) -> Result<SliceReport> {
    slice_diagnostics(field, spec, trace, &cfg.minimize.slices, &cfg.probe)
}

pub fn minimize(init: &CosseratField, cfg: &RunConfig, out: Option<&Path>) -> Result<MinimizeOutput> {
    let spec = cfg.boundary.spec();
    let data = match cfg.minimize.trace {
        TraceSource::Analytic => Some(thm1_boundary_data(&spec, &cfg.constants)?),
        TraceSource::Grid => None,
    };
    // slice heights fixed by the initial field, for the degree audit
    let levels = match &data {
        Some(d) => slice_report(init, &spec, &d.field, cfg)?.mu_levels,
        None => slice_report(init, &spec, init, cfg)?.mu_levels,
    };
    let mut audits = Vec::new();
    let result = minimize_with_audit(init, &Dirichlet::from_field(init), &cfg.minimize.solver, &cfg.constants, |iteration, f| {
        if cfg.minimize.degree_audit {
            let slice_degrees = match &data {
                Some(d) => slice_degrees(f, &d.field, &levels, &cfg.probe)?,
                None => slice_degrees(f, f, &levels, &cfg.probe)?,
            };
            audits.push(DegreeAudit { iteration, slice_degrees });
        }
        Ok(())
    })?;
    let slices = match &data {
        Some(d) => slice_report(&result.field, &spec, &d.field, cfg)?,
        None => slice_report(&result.field, &spec, &result.field, cfg)?,
    };
    let audit = minimizer_energy_audit(result.fin.total, &slices, &spec);
    if let Some(dir) = out {
        save_field(&result.field, &dir.join("field.csrf"))?;
        write_trace(&result.trace, std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?))?;
    }
    Ok(MinimizeOutput {
        config: cfg.clone(),
        iterations: result.trace.len() - 1,
        stop: result.stop,
        initial_energy: result.initial,
        final_energy: result.fin,
        slices,
        audit,
        degree_audits: audits,
    })
}

pub fn analyze(f: &CosseratField, cfg: &RunConfig) -> Result<AnalyzeOutput> {
    let singularities = find_singularities(f, cfg.analyze.probe_radius_h * f.domain.h, &cfg.probe)?;
    let dipoles = cfg
        .analyze
        .dipoles
        .iter()
        .map(|q| verify_dipole(f, &Vec3::from(q.p), &Vec3::from(q.n), q.radius, &cfg.probe))
        .collect::<Result<_>>()?;
    Ok(AnalyzeOutput { config: cfg.clone(), singularities, dipoles })
}
