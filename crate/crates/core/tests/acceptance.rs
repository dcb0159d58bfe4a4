//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use cosserat::boundary::thm1_boundary_data;
use cosserat::bubble::{bisect_alpha0, bubble_density, bubble_radii, cube_flip, disc_integral, Bubble, BubbledSampler};
use cosserat::commands::{insert, minimize, RunConfig};
use cosserat::cuboid::{default_alpha, insert_dipole};
use cosserat::degree::{sphere_degree, ProbeOptions};
use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::mesh::TriMesh;
use cosserat::minimize::gradient_check;
use cosserat::sampler::{Constant, TwoCharge};
use cosserat::singular::verify_dipole;
use cosserat::so3::{cover_differential, MaterialConstants, Rotation, UnitVector, Vec3};
use cosserat::surface::{cell_data, PlaneFrame, SurfacePatch};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

/// Manifests of the determinism-checked criteria, keyed by name.
type Manifests = BTreeMap<String, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn homothety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut g = || Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let (q, v) = (g(), g());
        let q = UnitVector::normalize(q).ok_or("degenerate q")?;
        let v = v - q.as_vec() * q.as_vec().dot(&v);
        let v = v * 10f64.powf(rng.gen_range(-3.0..3.0));
        let d = cover_differential(&q, &v).map_err(err)?;
        worst = worst.max((d.norm_squared() - 8.0 * v.norm_squared()).abs() / v.norm_squared());
    }
    Ok((worst < 1e-10, format!("max rel error {worst:.2e} (< 1e-10)")))
}

fn zero_energy_base() -> Outcome {
    let c = MaterialConstants::unit();
    let f = CosseratField::rigid_base(GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 32.0).map_err(err)?);
    let nonzero = f.domain.interior_nodes().filter(|&k| f.density(k, &c) != (0.0, 0.0)).count();
    let e = f.energy(&c).total;
    Ok((e == 0.0 && nonzero == 0, format!("energy {e:e}, nonzero nodal densities {nonzero}")))
}

fn bubble_law() -> Outcome {
    let c = MaterialConstants::unit();
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.05, 0.1, 0.2] {
        let frame = PlaneFrame::new(Vec3::zeros(), Vec3::x(), Vec3::y());
        let bubble = Bubble::new(frame, alpha, &Vec3::z(), None);
        let field = BubbledSampler { base: Constant::rigid(), bubbles: vec![bubble], tol: 1e-12 };
        let disc = disc_integral(&field, &bubble, &c, 512).map_err(err)?;
        let exact = 8.0 * PI / (1.0 + 4.0 * alpha * alpha);
        let rel = (disc.curvature_inner / 8.0 - exact).abs() / exact;

        let radii = bubble_radii(alpha, alpha);
        let steps = radii.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let inner: Vec<f64> = radii.iter().copied().take_while(|&r| r <= alpha / 2.0 + 1e-15).collect();
        let patch = SurfacePatch::polar_disc(&frame, &inner, 512);
        let values = patch.sample(&field).map_err(err)?;
        let point = cell_data(&patch, &values)
            .map_err(err)?
            .iter()
            .map(|cell| {
                let exact = bubble_density(alpha, cell.mid.norm());
                (cell.dn.norm_squared() - exact).abs() / exact
            })
            .fold(0.0, f64::max);
        ok &= rel < 0.01 && point < 0.02 && alpha / steps >= 8.0;
        parts.push(format!("α={alpha}: disc rel {rel:.1e}, pointwise {point:.1e}, α/h {:.0}", alpha / steps));
    }
    Ok((ok, parts.join("; ")))
}

fn cube_lemma(manifests: &mut Manifests) -> Outcome {
    let c = MaterialConstants::unit();
    let a0 = bisect_alpha0(&Constant::rigid(), 1.0, 1.0, &c, 20).map_err(err)?;
    let flip = cube_flip(Constant::rigid(), 1.0, a0, 1.0, &c, &ProbeOptions::default()).map_err(err)?;
    let r = &flip.report;
    manifests.insert("cube-flip".into(), serde_json::to_string(r).map_err(err)?);
    let ok = r.disc.total < 64.0 * PI + 1.0 && r.mod2_before == 0 && r.mod2_after == 1;
    Ok((ok, format!("α₀ {a0:.4}, integral {:.6} (< {:.6}), mod 2 degree {} → {}", r.disc.total, 64.0 * PI + 1.0, r.mod2_before, r.mod2_after)))
}

fn dipole_config(m: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dipole.p = [0.0, 0.0, -0.25];
    cfg.dipole.n = [0.0, 0.0, 0.25];
    cfg.dipole.m = m;
    cfg.dipole.alpha = None;
    cfg.dipole.h = 1.0 / 64.0;
    cfg
}

fn dipole_manifest(m: usize) -> Result<String, String> {
    serde_json::to_string(&insert(&dipole_config(m), None).map_err(err)?).map_err(err)
}

fn energy_bound(manifests: &mut Manifests) -> Outcome {
    let d = 0.5;
    let target = 64.0 * PI * d;
    let mut ok = true;
    let mut energies = Vec::new();
    let mut parts = Vec::new();
    for m in [4, 8, 16] {
        let cfg = dipole_config(m);
        let out = insert(&cfg, None).map_err(err)?;
        manifests.insert(format!("dipole-m{m}"), serde_json::to_string(&out).map_err(err)?);
        let man = &out.construction;
        let e = man.energy.report.total;
        energies.push(e);
        let centers: Vec<_> = man.degree_ledger.iter().filter(|l| l.label.starts_with('c')).collect();
        let faces: Vec<_> = man.degree_ledger.iter().filter(|l| l.label.starts_with("face")).collect();
        let mod2: Vec<u8> = centers.iter().filter_map(|l| l.mod2_degree).collect();
        let expected: Vec<u8> = (0..m).map(|j| u8::from(j == 0 || j + 1 == m)).collect();
        let p = Vec3::from(cfg.dipole.p);
        let step = (Vec3::from(cfg.dipole.n) - p) / (m - 1) as f64;
        let offset = centers
            .iter()
            .enumerate()
            .map(|(j, l)| (Vec3::from(l.location) - (p + step * j as f64)).norm())
            .fold(0.0, f64::max);
        let all_singular = centers.len() == m && centers.iter().all(|l| l.singular);
        let faces_regular = faces.iter().all(|l| !l.singular);
        ok &= e <= target * 1.15 && mod2 == expected && all_singular && faces_regular && offset <= cfg.dipole.h;
        parts.push(format!(
            "m={m}: {e:.4} ({:.5}×64πd), ledger {mod2:?}, {} singular points, max offset {offset:.1e}",
            e / target,
            centers.iter().filter(|l| l.singular).count()
        ));
    }
    let gaps: Vec<f64> = energies.iter().map(|e| (e - target).abs()).collect();
    let monotone = energies.windows(2).all(|w| w[1] < w[0]) && gaps.windows(2).all(|w| w[1] < w[0]);
    ok &= monotone;
    parts.push(format!("monotone approach to {target:.4}: {monotone}"));
    Ok((ok, parts.join("; ")))
}

/// Maps `S² → S²` through the chart `x ↦ (x₁ + i x₂)/(1 + x₃)`.
fn chart(x: &Vec3) -> Option<Complex<f64>> {
    (1.0 + x.z > 1e-14).then(|| Complex::new(x.x, x.y) / (1.0 + x.z))
}

fn unchart(z: Option<Complex<f64>>) -> Vec3 {
    match z {
        Some(z) if z.is_finite() => {
            let s = z.norm_sqr();
            Vec3::new(2.0 * z.re, 2.0 * z.im, 1.0 - s) / (1.0 + s)
        }
        _ => Vec3::new(0.0, 0.0, -1.0),
    }
}

/// Signed count of triangles whose image contains `y`.
fn preimage_count(mesh: &TriMesh, values: &[Vec3], y: &Vec3) -> i64 {
    mesh.triangles
        .iter()
        .map(|t| {
            let (a, b, c) = (values[t[0]], values[t[1]], values[t[2]]);
            let det = a.dot(&b.cross(&c));
            let s = det.signum();
            let inside = y.dot(&a.cross(&b)) * s > 0.0
                && y.dot(&b.cross(&c)) * s > 0.0
                && y.dot(&c.cross(&a)) * s > 0.0
                && y.dot(&(a + b + c)) > 0.0;
            if inside { s as i64 } else { 0 }
        })
        .sum()
}

fn degree_oracle() -> Outcome {
    type Map = Box<dyn Fn(&Vec3) -> Vec3>;
    let spin = *Rotation::between(&Vec3::z(), &Vec3::new(0.3, -0.5, 0.8).normalize()).matrix();
    let on_chart = |f: fn(Complex<f64>) -> Complex<f64>| -> Map { Box::new(move |x: &Vec3| unchart(chart(&(spin * x)).map(f))) };
    let suite: Vec<(i64, &str, Map)> = vec![
        (-2, "z̄²", on_chart(|z| z.conj().powu(2))),
        (-1, "z̄", on_chart(|z| z.conj())),
        (-1, "reflection", Box::new(|x: &Vec3| Vec3::new(x.x, x.y, -x.z))),
        (0, "fold", Box::new(|x: &Vec3| Vec3::new(x.x, x.y, x.z * x.z - 0.5).normalize())),
        (0, "constant", Box::new(|_: &Vec3| Vec3::new(0.6, 0.0, 0.8))),
        (1, "identity", Box::new(|x: &Vec3| *x)),
        (1, "möbius", on_chart(|z| (z - 0.3) / (z * 0.5 + 1.0))),
        (2, "z²", on_chart(|z| z.powu(2))),
        (2, "(z² + 0.4z)/(1 − 0.2z)", on_chart(|z| (z * z + z * 0.4) / (1.0 - z * 0.2))),
        (3, "z³", on_chart(|z| z.powu(3))),
        (3, "(z³ − 0.5)/(1 + 0.3z)", on_chart(|z| (z.powu(3) - 0.5) / (z * 0.3 + 1.0))),
    ];
    let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ys: Vec<Vec3> = (0..3)
        .map(|_| Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).normalize())
        .collect();
    let mut agree = 0;
    let mut bad = Vec::new();
    for (deg, name, f) in &suite {
        let values: Vec<Vec3> = mesh.vertices.iter().map(f).collect();
        let oracle = sphere_degree(&mesh, &values).map_err(err)?;
        let counts: Vec<i64> = ys.iter().map(|y| preimage_count(&mesh, &values, y)).collect();
        if counts.iter().all(|&k| k == oracle) && oracle == *deg {
            agree += 1;
        } else {
            bad.push(format!("{name}: expected {deg}, sphere_degree {oracle}, counts {counts:?}"));
        }
    }
    let detail = format!("{agree}/{} maps agree, degrees −2..3", suite.len());
    Ok((bad.is_empty(), if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join("; ")) }))
}

fn dipole_verification() -> Outcome {
    let opts = ProbeOptions::default();
    let base = CosseratField::rigid_base(GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 64.0).map_err(err)?);
    let (p, n, m) = (Vec3::new(0.0, 0.0, -0.25), Vec3::new(0.0, 0.0, 0.25), 8);
    let (_, dipole) = insert_dipole(&base, p, n, m, default_alpha(0.5, m)).map_err(err)?;
    let radius = 2.0 * dipole.dec.a;
    let inserted = verify_dipole(&dipole, &p, &n, radius, &opts).map_err(err)?;
    let equal = verify_dipole(&TwoCharge::equal(p, n), &p, &n, 0.1, &opts).map_err(err)?;
    Ok((
        inserted.verified && !equal.verified,
        format!(
            "inserted dipole verified {} (d = {:?}); equal charges verified {} ({})",
            inserted.verified,
            inserted.d,
            equal.verified,
            equal.failures.join(", ")
        ),
    ))
}

fn pipeline_config(n_target: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.boundary.n_target = n_target;
    cfg.boundary.h = 1.0 / 48.0;
    cfg
}

fn pipeline_manifest(n_target: usize) -> Result<(String, cosserat::commands::MinimizeOutput), String> {
    let cfg = pipeline_config(n_target);
    let data = thm1_boundary_data(&cfg.boundary.spec(), &cfg.constants).map_err(err)?;
    let init = data.grid(cfg.boundary.h).map_err(err)?;
    let out = minimize(&init, &cfg, None).map_err(err)?;
    Ok((serde_json::to_string(&out).map_err(err)?, out))
}

fn pipeline(manifests: &mut Manifests) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n_target in [1, 2] {
        let (text, out) = pipeline_manifest(n_target)?;
        manifests.insert(format!("minimize-n{n_target}"), text);
        ok &= out.audit.passed;
        let checks: Vec<String> = out
            .audit
            .assertions
            .iter()
            .map(|a| format!("{} {} ({:.3e} vs {:.3e})", if a.passed { "ok" } else { "FAILED" }, a.name, a.measured, a.threshold))
            .collect();
        parts.push(format!("N={n_target}: {} iterations, {}", out.iterations, checks.join(", ")));
    }
    Ok((ok, parts.join("; ")))
}

fn gradient() -> Outcome {
    let domain = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 16.0).map_err(err)?;
    let f = CosseratField::from_fn(domain, |x| {
        let phi = x + Vec3::new((3.0 * x.y).sin(), 0.4 * x.z * x.x, (2.0 * x.x).cos()) * 0.2;
        let n = (Vec3::new(x.y - 0.2, 0.7 * x.x + 0.1, 1.5) + Vec3::new((2.0 * x.z).sin(), x.x * x.y, 0.0) * 0.5).normalize();
        (phi, n)
    });
    let mut worst: f64 = 0.0;
    for (k, c) in [MaterialConstants::unit(), MaterialConstants::new(2.0, 0.5, 1.5, 0.7, 2.5).map_err(err)?].iter().enumerate() {
        worst = worst.max(gradient_check(&f, c, 100, 9 + k as u64).map_err(err)?);
    }
    Ok((worst < 1e-5, format!("max rel error {worst:.2e} over 100 probes × 2 constant sets (< 1e-5)")))
}

fn determinism(manifests: &Manifests) -> Outcome {
    if manifests.len() < 6 {
        return Ok((false, format!("only {} of 6 manifests were produced", manifests.len())));
    }
    let c = MaterialConstants::unit();
    let mut rerun = Manifests::new();
    let a0 = bisect_alpha0(&Constant::rigid(), 1.0, 1.0, &c, 20).map_err(err)?;
    let flip = cube_flip(Constant::rigid(), 1.0, a0, 1.0, &c, &ProbeOptions::default()).map_err(err)?;
    rerun.insert("cube-flip".into(), serde_json::to_string(&flip.report).map_err(err)?);
    for m in [4, 8, 16] {
        rerun.insert(format!("dipole-m{m}"), dipole_manifest(m)?);
    }
    for n_target in [1, 2] {
        rerun.insert(format!("minimize-n{n_target}"), pipeline_manifest(n_target)?.0);
    }
    let differing: Vec<&String> = manifests.keys().filter(|k| manifests.get(*k) != rerun.get(*k)).collect();
    let bytes: usize = manifests.values().map(String::len).sum();
    Ok((differing.is_empty(), format!("{} manifests, {bytes} bytes, differing: {differing:?}", manifests.len())))
}

fn main() {
    let mut manifests = Manifests::new();
    let mut failed = 0;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let (passed, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !passed {
            failed += 1;
        }
        println!("criterion {id:>2} {:<4} {name} [{:.1}s]: {detail}", if passed { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    };
    report(1, "homothety identity", &mut homothety);
    report(2, "zero-energy base state", &mut zero_energy_base);
    report(3, "bubble energy law", &mut bubble_law);
    report(4, "cube flip budget", &mut || cube_lemma(&mut manifests));
    report(5, "dipole energy bound", &mut || energy_bound(&mut manifests));
    report(6, "degree oracle equivalence", &mut degree_oracle);
    report(7, "dipole verification", &mut dipole_verification);
    report(8, "restricted minimization pipeline", &mut || pipeline(&mut manifests));
    report(9, "gradient check", &mut gradient);
    report(10, "determinism", &mut || determinism(&manifests));
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
