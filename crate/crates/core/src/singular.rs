//! Localization of singularities and verification of dipoles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{lift_along_path, mod2_degree_at, probe_surface, ProbeOptions};
use crate::error::{Error, Result};
use crate::grid::CosseratField;
use crate::mesh::TriMesh;
use crate::sampler::FieldSampler;
use crate::so3::{any_orthogonal, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub location: [f64; 3],
    /// `None` when the probe was ambiguous or failed.
    pub mod2_degree: Option<u8>,
    pub lift_degree: Option<i64>,
    pub probe_radius: f64,
    pub cluster_size: usize,
}

impl SingularPoint {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.location)
    }
}

/// Flags lattice cells whose corner rotations differ by more than the
/// singular angle and returns `(centroid, cell count)` per 26-connected cluster.
pub fn flagged_clusters(origin: &Vec3, h: f64, dims: [usize; 3], axes: &[Option<Vec3>], opts: &ProbeOptions) -> Vec<(Vec3, usize)> {
    // rotation angle between cover(p) and cover(q) is twice the angle between the axes
    let cos_half = (opts.singular_angle.to_radians() / 2.0).cos();
    let [nx, ny, nz] = dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Vec::new();
    }
    let (cx, cy, cz) = (nx - 1, ny - 1, nz - 1);
    let node = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let flags: Vec<bool> = (0..cx * cy * cz)
        .into_par_iter()
        .map(|c| {
            let (i, j, k) = (c % cx, (c / cx) % cy, c / (cx * cy));
            let mut corners = [Vec3::zeros(); 8];
            for (s, v) in corners.iter_mut().enumerate() {
                match axes[node(i + (s & 1), j + ((s >> 1) & 1), k + (s >> 2))] {
                    Some(a) => *v = a,
                    None => return false,
                }
            }
            (0..8).any(|a| (a + 1..8).any(|b| corners[a].dot(&corners[b]).abs() < cos_half))
        })
        .collect();
    let mut label = vec![usize::MAX; flags.len()];
    let mut clusters = Vec::new();
    for start in 0..flags.len() {
        if !flags[start] || label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[start] = id;
        let mut stack = vec![start];
        let mut sum = Vec3::zeros();
        let mut count = 0;
        while let Some(c) = stack.pop() {
            let (i, j, k) = (c % cx, (c / cx) % cy, c / (cx * cy));
            sum += origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h;
            count += 1;
            for dk in -1i64..=1 {
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b, e) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                        if a < 0 || b < 0 || e < 0 || a >= cx as i64 || b >= cy as i64 || e >= cz as i64 {
                            continue;
                        }
                        let nb = a as usize + cx * (b as usize + cy * e as usize);
                        if flags[nb] && label[nb] == usize::MAX {
                            label[nb] = id;
                            stack.push(nb);
                        }
                    }
                }
            }
        }
        clusters.push((sum / count as f64, count));
    }
    clusters
}

fn assign_degrees<S: FieldSampler + ?Sized>(sampler: &S, found: Vec<(Vec3, usize)>, probe_radius: f64, opts: &ProbeOptions) -> Vec<SingularPoint> {
    let ambiguous: Vec<bool> = (0..found.len())
        .map(|a| (0..found.len()).any(|b| a != b && (found[a].0 - found[b].0).norm() < 2.0 * probe_radius))
        .collect();
    found
        .par_iter()
        .zip(ambiguous)
        .map(|(&(x, size), amb)| {
            let degree = if amb { None } else { mod2_degree_at(sampler, &x, probe_radius, opts).ok() };
            SingularPoint {
                location: x.into(),
                mod2_degree: degree.map(|d| d.mod2),
                lift_degree: degree.map(|d| d.lift_degree),
                probe_radius,
                cluster_size: size,
            }
        })
        .collect()
}

/// Singularities of a grid field: flagged cells, clustered, each probed on
/// `S²_r(centroid)`. Clusters closer than `2r` get no degree.
pub fn find_singularities(field: &CosseratField, probe_radius: f64, opts: &ProbeOptions) -> Result<Vec<SingularPoint>> {
    let d = &field.domain;
    if probe_radius < 2.0 * d.h * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("probe radius {probe_radius} is below 2h = {}", 2.0 * d.h)));
    }
    let axes: Vec<Option<Vec3>> = (0..d.node_count()).map(|i| d.is_active(i).then(|| field.n[i])).collect();
    let found = flagged_clusters(&d.origin, d.h, d.dims, &axes, opts);
    Ok(assign_degrees(field, found, probe_radius, opts))
}

/// Largest relative rotation angle (degrees) between samples on `S²_r(x)`.
pub fn oscillation<S: FieldSampler + ?Sized>(sampler: &S, x: &Vec3, r: f64, opts: &ProbeOptions) -> Result<f64> {
    let mut mesh = TriMesh::icosphere(*x, r, 1);
    let features = sampler.features();
    let quiet = ProbeOptions { max_arc_rounds: 0, ..*opts };
    let axes = crate::degree::resolve(
        &mut mesh,
        &features,
        |pts| {
            pts.par_iter()
                .map(|p| sampler.axis(p).ok_or_else(|| Error::OutsideDomain(format!("probe point {p:?}"))))
                .collect()
        },
        true,
        &quiet,
    )?;
    let min_dot = (0..axes.len())
        .into_par_iter()
        .map(|a| (a + 1..axes.len()).map(|b| axes[a].dot(&axes[b]).abs()).fold(1.0, f64::min))
        .reduce(|| 1.0, f64::min);
    Ok(2.0 * min_dot.min(1.0).acos().to_degrees())
}

/// A point is singular when the field oscillates by at least the singular
/// angle on every sphere around it, from `r_max` down to `r_min`.
pub fn is_singular<S: FieldSampler + ?Sized>(sampler: &S, x: &Vec3, r_max: f64, r_min: f64, opts: &ProbeOptions) -> Result<bool> {
    let mut r = r_max;
    while r >= r_min {
        if oscillation(sampler, x, r, opts)? < opts.singular_angle {
            return Ok(false);
        }
        r /= 4.0;
    }
    Ok(true)
}

/// Where and how finely to search a sampled field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchRegion {
    pub min: Vec3,
    pub max: Vec3,
    pub h: f64,
}

/// Singularities of a sampled field inside a box: lattice scan at spacing
/// `h` plus the sampler's own candidates, each confirmed by the multiscale
/// oscillation test. Points closer than `h` to a candidate are merged into it.
pub fn find_singularities_sampled<S: FieldSampler + ?Sized>(
    sampler: &S,
    region: &SearchRegion,
    probe_radius: f64,
    r_min: f64,
    opts: &ProbeOptions,
) -> Result<Vec<SingularPoint>> {
    let found = locate_singularities(sampler, region, probe_radius, r_min, opts)?;
    Ok(assign_degrees(sampler, found, probe_radius, opts))
}

fn locate_singularities<S: FieldSampler + ?Sized>(
    sampler: &S,
    region: &SearchRegion,
    probe_radius: f64,
    r_min: f64,
    opts: &ProbeOptions,
) -> Result<Vec<(Vec3, usize)>> {
    let h = region.h;
    let extent = region.max - region.min;
    let dims = [0, 1, 2].map(|a| (extent[a] / h).ceil().max(1.0) as usize + 1);
    let count = dims[0] * dims[1] * dims[2];
    let axes: Vec<Option<Vec3>> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1]));
            sampler.axis(&(region.min + Vec3::new(i as f64, j as f64, k as f64) * h))
        })
        .collect();
    let inside = |x: &Vec3| (0..3).all(|a| x[a] >= region.min[a] && x[a] <= region.max[a]);
    let candidates: Vec<Vec3> = sampler.candidate_singularities().into_iter().filter(|c| inside(c)).collect();
    let mut found = Vec::new();
    for c in &candidates {
        if is_singular(sampler, c, probe_radius, r_min, opts)? {
            found.push((*c, 0));
        }
    }
    for (x, size) in flagged_clusters(&region.min, h, dims, &axes, opts) {
        if candidates.iter().any(|c| (c - x).norm() < h) {
            continue;
        }
        found.push((x, size));
    }
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleRecord {
    pub p: [f64; 3],
    pub n: [f64; 3],
    pub cylinder_radius: f64,
    pub verified: bool,
    /// Lift degree at `P` in the gauge shared with `N`.
    pub d: Option<i64>,
    pub mod2_p: Option<u8>,
    pub mod2_n: Option<u8>,
    pub lift_degree_p: Option<i64>,
    pub lift_degree_n: Option<i64>,
    pub probe_radius: f64,
    pub other_singularities: Vec<SingularPoint>,
    pub failures: Vec<String>,
}

/// Checks that `P` and `N` form a dipole of the field inside the cylinder of
/// the given radius around `[P, N]`. Singularities of mod-2 degree 0 in the
/// cylinder are tolerated.
pub fn verify_dipole<S: FieldSampler + ?Sized>(sampler: &S, p: &Vec3, n: &Vec3, radius: f64, opts: &ProbeOptions) -> Result<DipoleRecord> {
    let axis = n - p;
    let len = axis.norm();
    if !(len > 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidInput("dipole needs distinct endpoints and a positive radius".into()));
    }
    let mut failures = Vec::new();
    let in_cylinder = |x: &Vec3| {
        let t = ((x - p).dot(&axis) / (len * len)).clamp(0.0, 1.0);
        (x - (p + axis * t)).norm() <= radius
    };
    let region = SearchRegion {
        min: p.inf(n) - Vec3::repeat(radius),
        max: p.sup(n) + Vec3::repeat(radius),
        h: radius.min(len) / 6.0,
    };
    let r_min = sampler_scale(sampler).unwrap_or(radius * 1e-3) * 0.05;
    let located: Vec<(Vec3, usize)> =
        locate_singularities(sampler, &region, radius.min(len) / 4.0, r_min, opts)?.into_iter().filter(|(x, _)| in_cylinder(x)).collect();

    // probe radii small enough to isolate every located point
    let spacing = |x: &Vec3| {
        located.iter().map(|(y, _)| (x - y).norm()).filter(|d| *d > 1e-12 * len).fold(f64::INFINITY, f64::min)
    };
    let mut r_end = (radius / 2.0).min(len / 4.0);
    for e in [p, n] {
        r_end = r_end.min(0.45 * spacing(e));
    }

    let others: Vec<(Vec3, usize)> =
        located.iter().copied().filter(|(x, _)| (x - p).norm() > r_end && (x - n).norm() > r_end).collect();
    let mut other_points = Vec::new();
    for (x, size) in &others {
        let r = (0.45 * spacing(x)).min(r_end);
        let deg = mod2_degree_at(sampler, x, r, opts).ok();
        if deg.map(|d| d.mod2) != Some(0) {
            failures.push(format!("singularity of nonzero or unknown degree at {:?}", x.as_slice()));
        }
        other_points.push(SingularPoint {
            location: (*x).into(),
            mod2_degree: deg.map(|d| d.mod2),
            lift_degree: deg.map(|d| d.lift_degree),
            probe_radius: r,
            cluster_size: *size,
        });
    }

    // shared gauge: seed both spheres at the vertex furthest off the axis
    let perp = any_orthogonal(&axis);
    let template = TriMesh::icosphere(Vec3::zeros(), 1.0, opts.icosphere_level);
    let seed = (0..template.vertices.len())
        .max_by(|&a, &b| template.vertices[a].dot(&perp).total_cmp(&template.vertices[b].dot(&perp)))
        .unwrap_or(0);
    let probe_p = probe_surface(sampler, TriMesh::icosphere(*p, r_end, opts.icosphere_level), seed, None, opts)?;
    let xp = p + template.vertices[seed] * r_end;
    let xn = n + template.vertices[seed] * r_end;
    let carried = lift_along_path(sampler, &xp, &xn, &probe_p.values[seed], opts)?;
    let probe_n = probe_surface(sampler, TriMesh::icosphere(*n, r_end, opts.icosphere_level), seed, Some(carried), opts)?;

    let (dp, dn) = (probe_p.degree, probe_n.degree);
    let (m2p, m2n) = (dp.rem_euclid(2) as u8, dn.rem_euclid(2) as u8);
    if m2p != 1 || m2n != 1 {
        failures.push(format!("mod-2 degrees at the endpoints are ({m2p}, {m2n})"));
    }
    if dp != -dn {
        failures.push(format!("lift degrees {dp} and {dn} are not opposite"));
    }
    Ok(DipoleRecord {
        p: (*p).into(),
        n: (*n).into(),
        cylinder_radius: radius,
        verified: failures.is_empty(),
        d: Some(dp),
        mod2_p: Some(m2p),
        mod2_n: Some(m2n),
        lift_degree_p: Some(dp),
        lift_degree_n: Some(dn),
        probe_radius: r_end,
        other_singularities: other_points,
        failures,
    })
}

fn sampler_scale<S: FieldSampler + ?Sized>(sampler: &S) -> Option<f64> {
    sampler
        .features()
        .iter()
        .map(|f| f.thickness_a.max(f.thickness_b))
        .filter(|t| *t > 0.0)
        .min_by(f64::total_cmp)
}
