//! Closed, outward-oriented triangle meshes used as probe surfaces, with
//! conforming longest-edge bisection.

use std::collections::HashMap;

use crate::so3::Vec3;

/// Surface the vertices live on; new edge midpoints are projected onto it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    /// Piecewise flat; midpoints stay on the chord.
    Flat,
    Sphere { center: Vec3, radius: f64 },
    /// Boundary of `{|x − c| < r, z_lo < z < z_hi}`: two flat discs joined by a spherical band.
    Slice { center: Vec3, radius: f64, z_lo: f64, z_hi: f64 },
}

impl Surface {
    fn project(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let mid = (a + b) * 0.5;
        match *self {
            Surface::Flat => mid,
            Surface::Sphere { center, radius } => center + (mid - center).normalize() * radius,
            Surface::Slice { center, radius, z_lo, z_hi } => {
                let tol = 1e-9 * radius;
                let on_sphere = |p: &Vec3| ((p - center).norm() - radius).abs() < tol;
                if !(on_sphere(a) && on_sphere(b)) {
                    return mid;
                }
                for z in [z_lo, z_hi] {
                    if (a.z - z).abs() < tol && (b.z - z).abs() < tol {
                        // rim circle
                        let rho = (radius * radius - (z - center.z).powi(2)).max(0.0).sqrt();
                        let mut v = Vec3::new(mid.x - center.x, mid.y - center.y, 0.0);
                        let len = v.norm();
                        if len > 0.0 {
                            v *= rho / len;
                        }
                        return Vec3::new(center.x + v.x, center.y + v.y, z);
                    }
                }
                center + (mid - center).normalize() * radius
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub surface: Surface,
}

impl TriMesh {
    /// Icosahedron subdivided `level` times, on the sphere `S²_r(c)`.
    pub fn icosphere(center: Vec3, radius: f64, level: usize) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
            (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
            (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
        ];
        let vertices = raw
            .iter()
            .map(|&(x, y, z)| center + Vec3::new(x, y, z).normalize() * radius)
            .collect();
        let triangles = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        let mut mesh = TriMesh { vertices, triangles, surface: Surface::Sphere { center, radius } };
        for _ in 0..level {
            mesh.subdivide();
        }
        mesh
    }

    /// Boundary of the cube `c + [−s, s]³`, each face split into `n × n` squares.
    pub fn cube(center: Vec3, half: f64, n: usize) -> TriMesh {
        let n = n.max(1);
        let mut index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut vertex = |l: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
            *index.entry(l).or_insert_with(|| {
                let p = Vec3::new(l[0] as f64, l[1] as f64, l[2] as f64) * (2.0 * half / n as f64)
                    - Vec3::repeat(half);
                vertices.push(center + p);
                vertices.len() - 1
            })
        };
        for axis in 0..3 {
            for side in [0usize, n] {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for i in 0..n {
                    for j in 0..n {
                        let corner = |di: usize, dj: usize| {
                            let mut l = [0usize; 3];
                            l[axis] = side;
                            l[u] = i + di;
                            l[v] = j + dj;
                            l
                        };
                        let q = [
                            vertex(corner(0, 0), &mut vertices),
                            vertex(corner(1, 0), &mut vertices),
                            vertex(corner(1, 1), &mut vertices),
                            vertex(corner(0, 1), &mut vertices),
                        ];
                        // (u, v, axis) is right-handed, so this winding faces +axis
                        if side == n {
                            triangles.push([q[0], q[1], q[2]]);
                            triangles.push([q[0], q[2], q[3]]);
                        } else {
                            triangles.push([q[0], q[2], q[1]]);
                            triangles.push([q[0], q[3], q[2]]);
                        }
                    }
                }
            }
        }
        TriMesh { vertices, triangles, surface: Surface::Flat }
    }

    /// Boundary of the part of `B_r(c)` between the planes `z_lo < z_hi`.
    /// `k` vertices per ring, `radial` rings per disc, `band` rings on the sphere.
    pub fn slice_boundary(center: Vec3, radius: f64, z_lo: f64, z_hi: f64, k: usize, radial: usize, band: usize) -> TriMesh {
        let rho = |z: f64| (radius * radius - (z - center.z).powi(2)).max(0.0).sqrt();
        let ring = |z: f64, r: f64| -> Vec<Vec3> {
            (0..k)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                    Vec3::new(center.x + r * t.cos(), center.y + r * t.sin(), z)
                })
                .collect()
        };
        let mut rings = Vec::new();
        for i in 1..=radial {
            rings.push(ring(z_lo, rho(z_lo) * i as f64 / radial as f64));
        }
        let (th_lo, th_hi) = (((z_lo - center.z) / radius).acos(), ((z_hi - center.z) / radius).acos());
        for i in 1..band {
            let th = th_lo + (th_hi - th_lo) * i as f64 / band as f64;
            rings.push(ring(center.z + radius * th.cos(), radius * th.sin()));
        }
        for i in (1..=radial).rev() {
            rings.push(ring(z_hi, rho(z_hi) * i as f64 / radial as f64));
        }
        let bottom = Vec3::new(center.x, center.y, z_lo);
        let top = Vec3::new(center.x, center.y, z_hi);
        let mut mesh = TriMesh::from_rings(bottom, &rings, top);
        mesh.surface = Surface::Slice { center, radius, z_lo, z_hi };
        mesh
    }

    /// Topological sphere from a pole, rings of equal length, and a second pole.
    pub fn from_rings(bottom: Vec3, rings: &[Vec<Vec3>], top: Vec3) -> TriMesh {
        let k = rings[0].len();
        let mut vertices = vec![bottom];
        for r in rings {
            vertices.extend_from_slice(r);
        }
        vertices.push(top);
        let top_idx = vertices.len() - 1;
        let at = |ring: usize, i: usize| 1 + ring * k + (i % k);
        let mut triangles = Vec::new();
        for i in 0..k {
            triangles.push([0, at(0, i + 1), at(0, i)]);
        }
        for r in 0..rings.len() - 1 {
            for i in 0..k {
                triangles.push([at(r, i), at(r, i + 1), at(r + 1, i + 1)]);
                triangles.push([at(r, i), at(r + 1, i + 1), at(r + 1, i)]);
            }
        }
        let last = rings.len() - 1;
        for i in 0..k {
            triangles.push([top_idx, at(last, i), at(last, i + 1)]);
        }
        let mut mesh = TriMesh { vertices, triangles, surface: Surface::Flat };
        if mesh.signed_volume() < 0.0 {
            mesh.flip();
        }
        mesh
    }

    pub fn flip(&mut self) {
        for t in self.triangles.iter_mut() {
            t.swap(1, 2);
        }
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.tri_area(t)).sum()
    }

    pub fn tri_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).norm() * 0.5
    }

    /// Enclosed volume; positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Unique undirected edges in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// True when every edge is shared by exactly two oppositely oriented triangles.
    pub fn is_closed(&self) -> bool {
        let mut count: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *count.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        count.iter().all(|(&(a, b), &c)| c == 1 && count.get(&(b, a)) == Some(&1))
    }

    pub fn diameter(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    /// Splits every edge once.
    pub fn subdivide(&mut self) {
        let all = vec![true; self.triangles.len()];
        self.refine_marked(&all, true);
    }

    /// Bisects the longest edge of every flagged triangle and as many further
    /// longest edges as needed to keep the mesh conforming. Returns the index
    /// of the first new vertex.
    pub fn refine(&mut self, flagged: &[bool]) -> usize {
        self.refine_marked(flagged, false)
    }

    fn refine_marked(&mut self, flagged: &[bool], all_edges: bool) -> usize {
        let first_new = self.vertices.len();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_len = Vec::new();
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        for t in &self.triangles {
            let mut ids = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let next = edge_len.len();
                let id = *edge_id.entry(key).or_insert(next);
                if id == next {
                    edge_len.push((self.vertices[a] - self.vertices[b]).norm());
                }
                ids[e] = id;
            }
            tri_edges.push(ids);
        }
        let longest = |ids: &[usize; 3]| -> usize {
            let mut best = ids[0];
            for &i in &ids[1..] {
                if edge_len[i] > edge_len[best] || (edge_len[i] == edge_len[best] && i < best) {
                    best = i;
                }
            }
            best
        };
        let mut marked = vec![false; edge_len.len()];
        for (ids, &f) in tri_edges.iter().zip(flagged) {
            if f {
                if all_edges {
                    ids.iter().for_each(|&i| marked[i] = true);
                } else {
                    marked[longest(ids)] = true;
                }
            }
        }
        loop {
            let mut changed = false;
            for ids in &tri_edges {
                if ids.iter().any(|&i| marked[i]) {
                    let l = longest(ids);
                    if !marked[l] {
                        marked[l] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut keys: Vec<((usize, usize), usize)> = edge_id.iter().map(|(k, v)| (*k, *v)).collect();
        keys.sort_by_key(|(_, id)| *id);
        for (key, id) in keys {
            if marked[id] {
                let p = self.surface.project(&self.vertices[key.0], &self.vertices[key.1]);
                self.vertices.push(p);
                midpoint.insert(key, self.vertices.len() - 1);
            }
        }
        let old = std::mem::take(&mut self.triangles);
        let mut out = Vec::with_capacity(old.len() * 2);
        for t in old {
            self.split(t, &midpoint, &mut out);
        }
        self.triangles = out;
        first_new
    }

    fn split(&self, t: [usize; 3], midpoint: &HashMap<(usize, usize), usize>, out: &mut Vec<[usize; 3]>) {
        let mut best: Option<(usize, f64)> = None;
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if midpoint.contains_key(&(a.min(b), a.max(b))) {
                let len = (self.vertices[a] - self.vertices[b]).norm();
                if best.is_none_or(|(_, l)| len > l) {
                    best = Some((e, len));
                }
            }
        }
        match best {
            None => out.push(t),
            Some((e, _)) => {
                let (a, b, c) = (t[e], t[(e + 1) % 3], t[(e + 2) % 3]);
                let m = midpoint[&(a.min(b), a.max(b))];
                self.split([a, m, c], midpoint, out);
                self.split([m, b, c], midpoint, out);
            }
        }
    }
}
