//! Lifts through the double cover and Brouwer degrees on closed surfaces.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sampler::{Feature, FieldSampler};
use crate::so3::{axis_of, canonical_sign, AxisRotation, Vec3};

/// Thresholds for lifting and probing. Angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeOptions {
    /// Below `cos` of this angle between neighbours the sheet choice is ambiguous.
    pub ambiguous_angle: f64,
    /// Largest image arc allowed along a probe edge.
    pub max_arc: f64,
    /// Relative rotation angle across a cell that flags a singularity.
    pub singular_angle: f64,
    pub icosphere_level: usize,
    pub max_arc_rounds: usize,
    pub max_feature_rounds: usize,
    /// Uniform refinements tried when the degree does not round cleanly.
    pub retries: usize,
    pub max_triangles: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            ambiguous_angle: 80.0,
            max_arc: 15.0,
            singular_angle: 90.0,
            icosphere_level: 2,
            max_arc_rounds: 40,
            max_feature_rounds: 80,
            retries: 3,
            max_triangles: 2_000_000,
        }
    }
}

impl ProbeOptions {
    fn ambiguous_cos(&self) -> f64 {
        self.ambiguous_angle.to_radians().cos()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftResult {
    pub n: Vec<Option<Vec3>>,
    pub seed_node: usize,
    /// +1 when the seed kept the canonical representative, −1 when flipped.
    pub sign_choice: i8,
}

/// Breadth-first lift of rotations in 𝒮 over a node graph.
pub fn lift(rotations: &[AxisRotation], adjacency: &[Vec<usize>], seed: usize, opts: &ProbeOptions) -> Result<LiftResult> {
    let axes: Vec<Vec3> = rotations.iter().map(|r| axis_of(r).into_inner()).collect();
    lift_axes(&axes, adjacency, seed, None, opts)
}

/// Lift of sign-ambiguous axes. With `hint`, the seed takes the sign that
/// agrees with it; otherwise the canonical representative.
pub fn lift_axes(axes: &[Vec3], adjacency: &[Vec<usize>], seed: usize, hint: Option<Vec3>, opts: &ProbeOptions) -> Result<LiftResult> {
    let cos_min = opts.ambiguous_cos();
    let mut n: Vec<Option<Vec3>> = vec![None; axes.len()];
    let canonical = canonical_sign(axes[seed]);
    let (start, sign_choice) = match hint {
        Some(h) if h.dot(&canonical) < 0.0 => (-canonical, -1),
        _ => (canonical, 1),
    };
    n[seed] = Some(start);
    let mut queue = VecDeque::from([seed]);
    while let Some(u) = queue.pop_front() {
        let nu = n[u].expect("queued nodes are lifted");
        for &v in &adjacency[u] {
            if n[v].is_some() {
                continue;
            }
            let dot = axes[v].dot(&nu);
            if dot.abs() < cos_min {
                return Err(Error::AmbiguousLift { dot: dot.abs() });
            }
            let nv = if dot >= 0.0 { axes[v] } else { -axes[v] };
            for &w in &adjacency[v] {
                if let Some(nw) = n[w] {
                    let d = nv.dot(&nw);
                    if d <= -cos_min {
                        return Err(Error::LiftObstruction { node: v });
                    }
                    if d.abs() < cos_min {
                        return Err(Error::AmbiguousLift { dot: d.abs() });
                    }
                }
            }
            n[v] = Some(nv);
            queue.push_back(v);
        }
    }
    Ok(LiftResult { n, seed_node: seed, sign_choice })
}

/// Oriented solid angle of the spherical triangle `(a, b, c)`.
pub fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> Result<f64> {
    if (a + b).norm() < 1e-8 || (b + c).norm() < 1e-8 || (c + a).norm() < 1e-8 {
        return Err(Error::DegenerateTriangle);
    }
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    Ok(2.0 * num.atan2(den))
}

/// Unrounded degree: total oriented image area over 4π.
pub fn raw_degree(mesh: &TriMesh, values: &[Vec3]) -> Result<f64> {
    let parts: Result<Vec<f64>> = mesh
        .triangles
        .par_iter()
        .map(|t| solid_angle(&values[t[0]], &values[t[1]], &values[t[2]]))
        .collect();
    Ok(parts?.iter().sum::<f64>() / (4.0 * PI))
}

/// Integer degree of a map sampled at the vertices of a closed oriented mesh.
pub fn sphere_degree(mesh: &TriMesh, values: &[Vec3]) -> Result<i64> {
    let raw = raw_degree(mesh, values)?;
    let rounded = raw.round();
    if (raw - rounded).abs() >= 0.1 {
        return Err(Error::DegreeUnresolved { raw });
    }
    Ok(rounded as i64)
}

/// Outcome of probing a field on a closed surface.
#[derive(Clone, Debug)]
pub struct Probe {
    pub mesh: TriMesh,
    /// Lifted values at the mesh vertices.
    pub values: Vec<Vec3>,
    pub raw: f64,
    pub degree: i64,
}

fn sample_axes<S: FieldSampler + ?Sized>(sampler: &S, pts: &[Vec3]) -> Result<Vec<Vec3>> {
    pts.par_iter()
        .map(|x| sampler.axis(x).ok_or_else(|| Error::OutsideDomain(format!("probe point {x:?}"))))
        .collect()
}

/// Refines `mesh` so that it resolves `features`, then until neighbouring
/// samples differ by at most `opts.max_arc` (sign-insensitive when `unsigned`).
/// Returns the sampled values.
pub fn resolve<G>(mesh: &mut TriMesh, features: &[Feature], sample: G, unsigned: bool, opts: &ProbeOptions) -> Result<Vec<Vec3>>
where
    G: Fn(&[Vec3]) -> Result<Vec<Vec3>>,
{
    for _ in 0..opts.max_feature_rounds {
        if features.is_empty() || mesh.triangles.len() > opts.max_triangles {
            break;
        }
        let flags: Vec<bool> = mesh
            .triangles
            .par_iter()
            .map(|t| {
                let diam = mesh.diameter(t);
                let c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
                features.iter().any(|f| {
                    let (d, thick) = f.distance(&c);
                    let thick = thick.max(1e-12);
                    d < diam + 2.0 * thick && diam > thick / 3.0
                })
            })
            .collect();
        if !flags.iter().any(|&f| f) {
            break;
        }
        mesh.refine(&flags);
    }
    let mut values = sample(&mesh.vertices)?;
    let cos_arc = opts.max_arc.to_radians().cos();
    for _ in 0..opts.max_arc_rounds {
        if mesh.triangles.len() > opts.max_triangles {
            break;
        }
        let flags: Vec<bool> = mesh
            .triangles
            .par_iter()
            .map(|t| {
                (0..3).any(|e| {
                    let d = values[t[e]].dot(&values[t[(e + 1) % 3]]);
                    (if unsigned { d.abs() } else { d }) < cos_arc
                })
            })
            .collect();
        if !flags.iter().any(|&f| f) {
            break;
        }
        let first = mesh.refine(&flags);
        values.extend(sample(&mesh.vertices[first..])?);
    }
    Ok(values)
}

/// Lifts the axis of `sampler` on a resolved copy of `mesh` and computes the
/// degree of the lift. `seed` picks the vertex whose sign is fixed by `hint`.
pub fn probe_surface<S: FieldSampler + ?Sized>(
    sampler: &S,
    mesh: TriMesh,
    seed: usize,
    hint: Option<Vec3>,
    opts: &ProbeOptions,
) -> Result<Probe> {
    let features = sampler.features();
    let mut mesh = mesh;
    let mut last = None;
    for attempt in 0..=opts.retries {
        if attempt > 0 {
            mesh.subdivide();
        }
        let axes = resolve(&mut mesh, &features, |p| sample_axes(sampler, p), true, opts)?;
        let lifted = lift_axes(&axes, &mesh.adjacency(), seed, hint, opts)?;
        let values: Vec<Vec3> = lifted.n.into_iter().map(|v| v.expect("closed meshes are connected")).collect();
        let raw = raw_degree(&mesh, &values)?;
        if (raw - raw.round()).abs() < 0.1 {
            return Ok(Probe { degree: raw.round() as i64, raw, values, mesh });
        }
        last = Some(raw);
    }
    Err(Error::DegreeUnresolved { raw: last.unwrap_or(f64::NAN) })
}

/// Mod-2 degree of `R` on `S²_r(a)` and the degree of its lift there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalDegree {
    pub mod2: u8,
    pub lift_degree: i64,
}

pub fn mod2_degree_at<S: FieldSampler + ?Sized>(sampler: &S, a: &Vec3, r: f64, opts: &ProbeOptions) -> Result<LocalDegree> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput("probe radius must be positive".into()));
    }
    let probe = probe_surface(sampler, TriMesh::icosphere(*a, r, opts.icosphere_level), 0, None, opts)?;
    Ok(LocalDegree { mod2: probe.degree.rem_euclid(2) as u8, lift_degree: probe.degree })
}

/// Degree of `x ↦ (φ(x) − y)/|φ(x) − y|` on `S²_r(a)`.
pub fn map_degree_phi<S: FieldSampler + ?Sized>(sampler: &S, a: &Vec3, r: f64, y: &Vec3, opts: &ProbeOptions) -> Result<i64> {
    let sample = |pts: &[Vec3]| -> Result<Vec<Vec3>> {
        pts.par_iter()
            .map(|x| {
                let phi = sampler.phi(x).ok_or_else(|| Error::OutsideDomain(format!("probe point {x:?}")))?;
                let d = phi - y;
                let dist = d.norm();
                if dist < 1e-6 {
                    return Err(Error::ValueNotRegular { distance: dist });
                }
                Ok(d / dist)
            })
            .collect()
    };
    let mut mesh = TriMesh::icosphere(*a, r, opts.icosphere_level);
    let features = sampler.features();
    for attempt in 0..=opts.retries {
        if attempt > 0 {
            mesh.subdivide();
        }
        let values = resolve(&mut mesh, &features, sample, false, opts)?;
        if let Ok(d) = sphere_degree(&mesh, &values) {
            return Ok(d);
        }
    }
    let values = sample(&mesh.vertices)?;
    sphere_degree(&mesh, &values)
}

/// Lifts the axis field along the segment `x0 → x1`, starting from `n0`.
/// Returns the lifted value at `x1`.
pub fn lift_along_path<S: FieldSampler + ?Sized>(sampler: &S, x0: &Vec3, x1: &Vec3, n0: &Vec3, opts: &ProbeOptions) -> Result<Vec3> {
    let cos_arc = opts.max_arc.to_radians().cos();
    let axis = |x: &Vec3| sampler.axis(x).ok_or_else(|| Error::OutsideDomain(format!("path point {x:?}")));
    let mut n = *n0;
    let mut t = 0.0;
    let mut dt: f64 = 1.0 / 64.0;
    while t < 1.0 {
        let step = dt.min(1.0 - t);
        let x = x0 + (x1 - x0) * (t + step);
        let v = axis(&x)?;
        let d = v.dot(&n);
        if d.abs() < cos_arc && step > 1e-12 {
            dt = step / 2.0;
            continue;
        }
        if d.abs() < opts.ambiguous_cos() {
            return Err(Error::AmbiguousLift { dot: d.abs() });
        }
        n = if d >= 0.0 { v } else { -v };
        t += step;
        dt = (dt * 2.0).min(1.0 / 64.0);
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Hedgehog;
    use crate::so3::{cover, UnitVector};
    use approx::assert_relative_eq;

    fn polar_map(k: i32) -> impl Fn(&Vec3) -> Vec3 {
        move |x: &Vec3| {
            let th = x.z.clamp(-1.0, 1.0).acos();
            let ph = x.y.atan2(x.x) * k as f64;
            Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos())
        }
    }

    #[test]
    fn identity_and_constant_degrees() {
        let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, 3);
        let id: Vec<Vec3> = mesh.vertices.clone();
        assert_eq!(sphere_degree(&mesh, &id).unwrap(), 1);
        let c = vec![Vec3::new(0.0, 0.6, 0.8); mesh.vertices.len()];
        assert_eq!(sphere_degree(&mesh, &c).unwrap(), 0);
    }

    #[test]
    fn doubled_azimuth_has_degree_two() {
        let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, 4);
        let f = polar_map(2);
        let v: Vec<Vec3> = mesh.vertices.iter().map(f).collect();
        assert_eq!(sphere_degree(&mesh, &v).unwrap(), 2);
    }

    #[test]
    fn antipodal_images_are_degenerate() {
        let z = Vec3::z();
        assert!(matches!(solid_angle(&z, &-z, &Vec3::x()), Err(Error::DegenerateTriangle)));
        assert_relative_eq!(solid_angle(&Vec3::x(), &Vec3::y(), &Vec3::z()).unwrap(), PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_rotation_lifts_to_constant() {
        let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, 1);
        let r = cover(&UnitVector::e3());
        let rots = vec![r; mesh.vertices.len()];
        let res = lift(&rots, &mesh.adjacency(), 0, &ProbeOptions::default()).unwrap();
        assert!(res.n.iter().all(|n| n.unwrap() == Vec3::z()));
        let flipped = lift_axes(&vec![Vec3::z(); mesh.vertices.len()], &mesh.adjacency(), 0, Some(-Vec3::z()), &ProbeOptions::default()).unwrap();
        assert!(flipped.n.iter().all(|n| n.unwrap() == -Vec3::z()));
        assert_eq!(flipped.sign_choice, -1);
    }

    #[test]
    fn hedgehog_lift_round_trip() {
        let a = Vec3::new(2.0, 0.0, 0.0);
        let mesh = TriMesh::icosphere(Vec3::zeros(), 0.5, 3);
        let truth: Vec<Vec3> = mesh.vertices.iter().map(|x| (x - a).normalize()).collect();
        let rots: Vec<AxisRotation> = truth.iter().map(|q| cover(&UnitVector::new(*q).unwrap())).collect();
        let res = lift(&rots, &mesh.adjacency(), 0, &ProbeOptions::default()).unwrap();
        let s = res.n[0].unwrap().dot(&truth[0]).signum();
        for (n, t) in res.n.iter().zip(&truth) {
            assert_relative_eq!(n.unwrap() * s, *t, epsilon = 1e-9);
        }
    }

    #[test]
    fn jump_is_ambiguous() {
        let adj = vec![vec![1], vec![0]];
        let axes = [Vec3::z(), Vec3::x()];
        assert!(matches!(lift_axes(&axes, &adj, 0, None, &ProbeOptions::default()), Err(Error::AmbiguousLift { .. })));
    }

    #[test]
    fn odd_loop_is_obstructed() {
        // axis turning by 180° around a loop of six nodes: the lift cannot close
        let k = 6;
        let axes: Vec<Vec3> = (0..k)
            .map(|i| {
                let t = PI * i as f64 / k as f64;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let adj: Vec<Vec<usize>> = (0..k).map(|i| vec![(i + 1) % k, (i + k - 1) % k]).collect();
        assert!(matches!(lift_axes(&axes, &adj, 0, None, &ProbeOptions::default()), Err(Error::LiftObstruction { .. })));
    }

    #[test]
    fn hedgehog_mod2_degree() {
        let h = Hedgehog { center: Vec3::new(0.1, -0.2, 0.3) };
        for r in [0.05, 0.3, 1.0] {
            let d = mod2_degree_at(&h, &h.center, r, &ProbeOptions::default()).unwrap();
            assert_eq!(d.mod2, 1);
            assert_eq!(d.lift_degree.abs(), 1);
        }
        let far = mod2_degree_at(&h, &Vec3::new(3.0, 0.0, 0.0), 0.5, &ProbeOptions::default()).unwrap();
        assert_eq!(far.mod2, 0);
    }

    #[test]
    fn phi_degree() {
        let id = crate::sampler::FnSampler(|x: &Vec3| Some((*x, Vec3::z())));
        let o = ProbeOptions::default();
        assert_eq!(map_degree_phi(&id, &Vec3::zeros(), 1.0, &Vec3::zeros(), &o).unwrap(), 1);
        let c = crate::sampler::FnSampler(|_: &Vec3| Some((Vec3::x(), Vec3::z())));
        assert_eq!(map_degree_phi(&c, &Vec3::zeros(), 1.0, &Vec3::zeros(), &o).unwrap(), 0);
        assert!(matches!(
            map_degree_phi(&c, &Vec3::zeros(), 1.0, &Vec3::x(), &o),
            Err(Error::ValueNotRegular { .. })
        ));
    }
}
