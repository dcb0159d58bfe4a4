//! Alternating projected gradient descent on the discrete energy, with `n`
//! kept on the unit sphere and boundary values held fixed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CosseratField, EnergyReport, NodeClass, AXES};
use crate::so3::{canonical_sign, cover_matrix, p_operator, Mat3, MaterialConstants, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    Fixed,
    /// Armijo backtracking: shrink by `beta` until the decrease is at least `c·t·|g|²`.
    Backtracking { beta: f64, c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Trial step in units of `h²`, applied to the nodal (L²) gradient.
    pub step_size: f64,
    pub step_rule: StepRule,
    pub grad_tol: f64,
    pub energy_tol: f64,
    /// Iterations over which the energy decrease is compared with `energy_tol`.
    pub window: usize,
    pub audit_every: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 2000,
            step_size: 0.05,
            step_rule: StepRule::Backtracking { beta: 0.5, c: 1e-4 },
            grad_tol: 1e-8,
            energy_tol: 1e-9,
            window: 50,
            audit_every: 100,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0 && self.grad_tol > 0.0 && self.energy_tol > 0.0 && self.window > 0;
        let rule_ok = match self.step_rule {
            StepRule::Fixed => true,
            StepRule::Backtracking { beta, c } => beta > 0.0 && beta < 1.0 && c > 0.0 && c < 1.0,
        };
        if ok && rule_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("solver tolerances and steps must be positive, 0 < β, c < 1".into()))
        }
    }
}

/// Gradient of the discrete energy divided by `h³`, per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub phi: Vec<Vec3>,
    /// Tangential part only.
    pub n: Vec<Vec3>,
}

impl Gradient {
    /// `(Σ |g|² h³)^{1/2}` over both blocks.
    pub fn norm(&self, h: f64) -> f64 {
        let s: f64 = self.phi.iter().chain(&self.n).map(|g| g.norm_squared()).sum();
        (s * h * h * h).sqrt()
    }
}

struct NodeTerms {
    g_phi: Mat3,
    n_self: Vec3,
    q: [Vec3; 3],
}

fn node_terms(f: &CosseratField, i: usize, c: &MaterialConstants) -> NodeTerms {
    let d = &f.domain;
    let inv = 0.5 / d.h;
    let n = f.n[i];
    let mut dphi = Mat3::zeros();
    let mut raw = [Vec3::zeros(); 3];
    for a in AXES {
        let (p, q) = (d.neighbor(i, a, 1).unwrap(), d.neighbor(i, a, -1).unwrap());
        dphi.set_column(a, &((f.phi[p] - f.phi[q]) * inv));
        raw[a] = (f.n[p] - f.n[q]) * inv;
    }
    let r = cover_matrix(&n);
    let m = r * dphi - Mat3::identity();
    let w = p_operator(&p_operator(&m, c), c);
    let g_phi = r * w * 2.0;
    let u = w * dphi.transpose();
    let mut n_self = (u + u.transpose()) * n * 4.0;
    let proj = Mat3::identity() - n * n.transpose();
    let dvec: [Vec3; 3] = [proj * raw[0], proj * raw[1], proj * raw[2]];
    let s: f64 = dvec.iter().map(|v| 8.0 * v.norm_squared()).sum();
    let weight = if c.p == 2.0 {
        c.lambda
    } else if s > 0.0 {
        c.lambda * c.p / 2.0 * s.powf(c.p / 2.0 - 1.0)
    } else {
        0.0
    };
    for a in AXES {
        n_self -= raw[a] * (16.0 * weight * n.dot(&raw[a]));
    }
    let q = [dvec[0] * (16.0 * weight), dvec[1] * (16.0 * weight), dvec[2] * (16.0 * weight)];
    NodeTerms { g_phi, n_self, q }
}

/// Analytic gradient of the discrete energy with respect to every node value.
/// Dirichlet and outside nodes receive zero.
pub fn energy_gradient(f: &CosseratField, c: &MaterialConstants) -> Gradient {
    let d = &f.domain;
    let terms: Vec<Option<NodeTerms>> = (0..d.node_count())
        .into_par_iter()
        .map(|i| (d.class(i) == NodeClass::Interior).then(|| node_terms(f, i, c)))
        .collect();
    let inv = 0.5 / d.h;
    let (phi, n): (Vec<Vec3>, Vec<Vec3>) = (0..d.node_count())
        .into_par_iter()
        .map(|k| {
            if f.dirichlet[k] || !d.is_active(k) {
                return (Vec3::zeros(), Vec3::zeros());
            }
            let mut gp = Vec3::zeros();
            let mut gn = terms[k].as_ref().map_or(Vec3::zeros(), |t| t.n_self);
            for a in AXES {
                // k is the forward neighbour of k − e_a and the backward one of k + e_a
                if let Some(t) = d.neighbor(k, a, -1).and_then(|i| terms[i].as_ref()) {
                    gp += t.g_phi.column(a) * inv;
                    gn += t.q[a] * inv;
                }
                if let Some(t) = d.neighbor(k, a, 1).and_then(|i| terms[i].as_ref()) {
                    gp -= t.g_phi.column(a) * inv;
                    gn -= t.q[a] * inv;
                }
            }
            let nk = f.n[k];
            (gp, gn - nk * nk.dot(&gn))
        })
        .unzip();
    Gradient { phi, n }
}

/// Worst relative error between the analytic gradient and central finite
/// differences of the energy, over `probes` random free nodes and directions.
pub fn gradient_check(f: &CosseratField, c: &MaterialConstants, probes: usize, seed: u64) -> Result<f64> {
    let d = &f.domain;
    let free: Vec<usize> = (0..d.node_count()).filter(|&k| !f.dirichlet[k] && d.class(k) == NodeClass::Interior).collect();
    if free.is_empty() {
        return Err(Error::InvalidInput("no free interior nodes".into()));
    }
    let g = energy_gradient(f, c);
    let vol = d.h.powi(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<(usize, bool, Vec3)> = (0..probes)
        .map(|_| {
            let k = free[rng.gen_range(0..free.len())];
            let v = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            (k, rng.gen::<bool>(), v)
        })
        .collect();
    let errs: Vec<f64> = picks
        .par_iter()
        .map(|&(k, on_n, v)| {
            let dir = if on_n { v - f.n[k] * f.n[k].dot(&v) } else { v };
            let dir = dir / dir.norm();
            let t = 1e-6 * d.h;
            let local = |s: f64| {
                let mut g2 = f.clone();
                if on_n {
                    g2.n[k] += dir * s;
                } else {
                    g2.phi[k] += dir * s;
                }
                local_energy(&g2, k, c)
            };
            let fd = (local(t) - local(-t)) / (2.0 * t);
            let an = vol * if on_n { g.n[k].dot(&dir) } else { g.phi[k].dot(&dir) };
            let scale = (vol * if on_n { g.n[k].norm() } else { g.phi[k].norm() }).max(1e-300);
            (fd - an).abs() / scale
        })
        .collect();
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Energy of the interior nodes whose stencil touches node `k`.
pub fn local_energy(f: &CosseratField, k: usize, c: &MaterialConstants) -> f64 {
    let d = &f.domain;
    let mut nodes = vec![k];
    for a in AXES {
        nodes.extend(d.neighbor(k, a, 1));
        nodes.extend(d.neighbor(k, a, -1));
    }
    let vol = d.h.powi(3);
    nodes
        .into_iter()
        .filter(|&i| d.class(i) == NodeClass::Interior)
        .map(|i| {
            let (a, b) = f.density(i, c);
            (a + b) * vol
        })
        .sum()
}

/// Fixed boundary values.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub nodes: Vec<usize>,
    pub phi: Vec<Vec3>,
    pub n: Vec<Vec3>,
}

impl Dirichlet {
    pub fn from_field(f: &CosseratField) -> Self {
        let nodes: Vec<usize> = (0..f.domain.node_count()).filter(|&i| f.dirichlet[i]).collect();
        Dirichlet { phi: nodes.iter().map(|&i| f.phi[i]).collect(), n: nodes.iter().map(|&i| f.n[i]).collect(), nodes }
    }

    fn mismatches(&self, f: &CosseratField) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(j, &i)| {
                i >= f.phi.len()
                    || !f.dirichlet[i]
                    || (f.phi[i] - self.phi[j]).norm() > 1e-12
                    || (canonical_sign(f.n[i]) - canonical_sign(self.n[j])).norm() > 1e-12
            })
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub deformation: f64,
    pub curvature: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EnergyStalled,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub field: CosseratField,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub initial: EnergyReport,
    pub fin: EnergyReport,
}

/// Writes the trace as CSV.
pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn minimize_restricted(init: &CosseratField, dirichlet: &Dirichlet, cfg: &SolverConfig, c: &MaterialConstants) -> Result<MinimizeResult> {
    minimize_with_audit(init, dirichlet, cfg, c, |_, _| Ok(()))
}

/// As [`minimize_restricted`], calling `audit` on the current field every
/// `cfg.audit_every` iterations.
pub fn minimize_with_audit<A>(init: &CosseratField, dirichlet: &Dirichlet, cfg: &SolverConfig, c: &MaterialConstants, mut audit: A) -> Result<MinimizeResult>
where
    A: FnMut(usize, &CosseratField) -> Result<()>,
{
    cfg.validate()?;
    let mismatches = dirichlet.mismatches(init);
    if mismatches > 0 {
        return Err(Error::BoundaryMismatch { mismatches });
    }
    let h = init.domain.h;
    let mut f = init.clone();
    let initial = f.energy(c);
    let mut energy = initial.clone();
    let mut trace = vec![TraceRow { iter: 0, energy: energy.total, deformation: energy.deformation, curvature: energy.curvature, grad_norm: f64::NAN, step: 0.0 }];
    let mut steps = [cfg.step_size * h * h; 2];
    let mut stop = StopReason::MaxIterations;
    for iter in 1..=cfg.max_iters {
        let g = energy_gradient(&f, c);
        let gnorm = g.norm(h);
        if let Some(first) = trace.first_mut().filter(|r| r.grad_norm.is_nan()) {
            first.grad_norm = gnorm;
        }
        if gnorm < cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut phi_grad = Some(g.phi);
        for (block, step) in steps.iter_mut().enumerate() {
            let grad = match phi_grad.take() {
                Some(gp) if block == 0 => gp,
                _ => energy_gradient(&f, c).n,
            };
            let g2: f64 = grad.iter().map(|v| v.norm_squared()).sum::<f64>() * h * h * h;
            if g2 == 0.0 {
                continue;
            }
            let (cand, e, t) = line_search(&f, &grad, block == 1, energy.total, g2, *step, cfg, c, iter)?;
            f = cand;
            energy = e;
            *step = t;
        }
        trace.push(TraceRow { iter, energy: energy.total, deformation: energy.deformation, curvature: energy.curvature, grad_norm: gnorm, step: steps[1] });
        if cfg.audit_every > 0 && iter % cfg.audit_every == 0 {
            audit(iter, &f)?;
        }
        if iter >= cfg.window {
            let past = trace[iter - cfg.window].energy;
            if past - energy.total < cfg.energy_tol {
                stop = StopReason::EnergyStalled;
                break;
            }
        }
    }
    Ok(MinimizeResult { field: f, trace, stop, initial, fin: energy })
}

fn apply(f: &CosseratField, grad: &[Vec3], on_n: bool, t: f64) -> CosseratField {
    let mut out = f.clone();
    if on_n {
        out.n.par_iter_mut().zip(grad).for_each(|(n, g)| {
            if *g != Vec3::zeros() {
                let v = *n - g * t;
                *n = v / v.norm();
            }
        });
    } else {
        out.phi.par_iter_mut().zip(grad).for_each(|(p, g)| *p -= g * t);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    f: &CosseratField,
    grad: &[Vec3],
    on_n: bool,
    e0: f64,
    g2: f64,
    t0: f64,
    cfg: &SolverConfig,
    c: &MaterialConstants,
    iter: usize,
) -> Result<(CosseratField, EnergyReport, f64)> {
    match cfg.step_rule {
        StepRule::Fixed => {
            let cand = apply(f, grad, on_n, t0);
            let e = cand.energy(c);
            if !e.total.is_finite() {
                return Err(Error::NumericalBlowup { iteration: iter });
            }
            Ok((cand, e, t0))
        }
        StepRule::Backtracking { beta, c: armijo } => {
            let mut t = t0 / beta;
            for _ in 0..60 {
                let cand = apply(f, grad, on_n, t);
                let e = cand.energy(c);
                if e.total.is_nan() {
                    return Err(Error::NumericalBlowup { iteration: iter });
                }
                if e.total <= e0 - armijo * t * g2 {
                    return Ok((cand, e, t));
                }
                t *= beta;
            }
            Ok((f.clone(), f.energy(c), t))
        }
    }
}
