//! Quadric-error-metric edge collapse.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use super::mesh::{add, cross, dot, norm, scale, sub, MeshError, TriMesh};
use crate::scenario::Vec3;

/// Smallest target a caller may ask for: a tetrahedron.
pub const MIN_TARGET: usize = 4;

const BOUNDARY_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimateError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("target must be at least {MIN_TARGET} triangles, got {0}")]
    TargetTooSmall(usize),
}

/// Collapses edges in order of quadric error until at most `target`
/// triangles remain or no collapse is legal. Collapses that would break
/// the local topology, flip a face or create a sliver are skipped.
pub fn decimate(m: &TriMesh, target: usize) -> Result<TriMesh, DecimateError> {
    if m.is_empty() {
        return Err(MeshError::EmptyMesh.into());
    }
    if target < MIN_TARGET {
        return Err(DecimateError::TargetTooSmall(target));
    }
    if target >= m.triangle_count() {
        return Ok(m.clone());
    }
    let mut d = Decimator::new(m);
    d.run(target);
    Ok(d.into_mesh())
}

type Quadric = [f64; 10];

fn plane_quadric(n: Vec3, d: f64, w: f64) -> Quadric {
    let [a, b, c] = n;
    [
        w * a * a,
        w * a * b,
        w * a * c,
        w * a * d,
        w * b * b,
        w * b * c,
        w * b * d,
        w * c * c,
        w * c * d,
        w * d * d,
    ]
}

fn q_add(a: &Quadric, b: &Quadric) -> Quadric {
    let mut out = *a;
    for (o, x) in out.iter_mut().zip(b) {
        *o += x;
    }
    out
}

fn q_eval(q: &Quadric, p: Vec3) -> f64 {
    let [x, y, z] = p;
    q[0] * x * x
        + 2.0 * q[1] * x * y
        + 2.0 * q[2] * x * z
        + 2.0 * q[3] * x
        + q[4] * y * y
        + 2.0 * q[5] * y * z
        + 2.0 * q[6] * y
        + q[7] * z * z
        + 2.0 * q[8] * z
        + q[9]
}

fn q_minimizer(q: &Quadric) -> Option<Vec3> {
    let (a, b, c, e, f, h) = (q[0], q[1], q[2], q[4], q[5], q[7]);
    let r = [-q[3], -q[6], -q[8]];
    let det = a * (e * h - f * f) - b * (b * h - f * c) + c * (b * f - e * c);
    let scale = a.abs().max(e.abs()).max(h.abs());
    if scale == 0.0 || det.abs() <= 1e-10 * scale * scale * scale {
        return None;
    }
    let x = (r[0] * (e * h - f * f) - b * (r[1] * h - f * r[2]) + c * (r[1] * f - e * r[2])) / det;
    let y = (a * (r[1] * h - f * r[2]) - r[0] * (b * h - f * c) + c * (b * r[2] - r[1] * c)) / det;
    let z = (a * (e * r[2] - r[1] * f) - b * (b * r[2] - r[1] * c) + r[0] * (b * f - e * c)) / det;
    let p = [x, y, z];
    p.iter().all(|v| v.is_finite()).then_some(p)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp_u: u32,
    stamp_v: u32,
    target: Vec3,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest edge, lowest ids first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.u.cmp(&self.u))
            .then_with(|| other.v.cmp(&self.v))
            .then_with(|| other.stamp_u.cmp(&self.stamp_u))
            .then_with(|| other.stamp_v.cmp(&self.stamp_v))
    }
}

struct Decimator {
    pos: Vec<Vec3>,
    quadrics: Vec<Quadric>,
    tris: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vert_tris: Vec<Vec<u32>>,
    vert_alive: Vec<bool>,
    stamp: Vec<u32>,
    alive: usize,
    heap: BinaryHeap<Candidate>,
}

impl Decimator {
    fn new(m: &TriMesh) -> Self {
        let nv = m.vertex_count();
        let mut quadrics = alloc::vec![[0.0; 10]; nv];
        let mut vert_tris: Vec<Vec<u32>> = alloc::vec![Vec::new(); nv];
        let mut edges: Vec<(u32, u32, u32)> = Vec::with_capacity(m.triangle_count() * 3);

        for (t, tri) in m.triangles().iter().enumerate() {
            let [a, b, c] = m.corners(t);
            let n = cross(sub(b, a), sub(c, a));
            let len = norm(n);
            if len > 0.0 {
                let n = scale(n, 1.0 / len);
                let q = plane_quadric(n, -dot(n, a), 0.5 * len);
                for &v in tri {
                    quadrics[v as usize] = q_add(&quadrics[v as usize], &q);
                }
            }
            for k in 0..3 {
                let (x, y) = (tri[k], tri[(k + 1) % 3]);
                edges.push((x.min(y), x.max(y), t as u32));
                vert_tris[tri[k] as usize].push(t as u32);
            }
        }
        edges.sort_unstable();

        // Planes through boundary edges, perpendicular to their face, keep
        // open borders from shrinking.
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            if j - i == 1 {
                let (x, y, t) = edges[i];
                let [a, b, c] = m.corners(t as usize);
                let face_n = cross(sub(b, a), sub(c, a));
                let (px, py) = (m.vertices()[x as usize], m.vertices()[y as usize]);
                let e = sub(py, px);
                let n = cross(e, face_n);
                let len = norm(n);
                if len > 0.0 {
                    let n = scale(n, 1.0 / len);
                    let q = plane_quadric(n, -dot(n, px), BOUNDARY_WEIGHT * dot(e, e));
                    quadrics[x as usize] = q_add(&quadrics[x as usize], &q);
                    quadrics[y as usize] = q_add(&quadrics[y as usize], &q);
                }
            }
            i = j;
        }

        let mut d = Decimator {
            pos: m.vertices().to_vec(),
            quadrics,
            tris: m.triangles().to_vec(),
            tri_alive: alloc::vec![true; m.triangle_count()],
            vert_tris,
            vert_alive: alloc::vec![true; nv],
            stamp: alloc::vec![0; nv],
            alive: m.triangle_count(),
            heap: BinaryHeap::new(),
        };
        edges.dedup_by_key(|e| (e.0, e.1));
        for (u, v, _) in edges {
            d.push(u, v);
        }
        d
    }

    fn push(&mut self, u: u32, v: u32) {
        let (u, v) = (u.min(v), u.max(v));
        let q = q_add(&self.quadrics[u as usize], &self.quadrics[v as usize]);
        let (pu, pv) = (self.pos[u as usize], self.pos[v as usize]);
        let mid = scale(add(pu, pv), 0.5);
        let edge = norm(sub(pv, pu));
        let mut best = match q_minimizer(&q) {
            Some(p) if norm(sub(p, mid)) <= 2.0 * edge => Some((q_eval(&q, p), p)),
            _ => None,
        };
        if best.is_none() {
            for p in [pu, pv, mid] {
                let c = q_eval(&q, p);
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, p));
                }
            }
        }
        let (cost, target) = best.expect("at least one candidate");
        self.heap.push(Candidate {
            cost: cost.max(0.0),
            u,
            v,
            stamp_u: self.stamp[u as usize],
            stamp_v: self.stamp[v as usize],
            target,
        });
    }

    fn live_tris(&self, v: u32) -> Vec<u32> {
        self.vert_tris[v as usize]
            .iter()
            .copied()
            .filter(|&t| self.tri_alive[t as usize])
            .collect()
    }

    fn run(&mut self, target: usize) {
        while self.alive > target {
            let Some(c) = self.heap.pop() else { break };
            let (u, v) = (c.u as usize, c.v as usize);
            if !self.vert_alive[u]
                || !self.vert_alive[v]
                || self.stamp[u] != c.stamp_u
                || self.stamp[v] != c.stamp_v
            {
                continue;
            }
            self.try_collapse(c.u, c.v, c.target);
        }
    }

    fn try_collapse(&mut self, u: u32, v: u32, p: Vec3) -> bool {
        let tris_u = self.live_tris(u);
        let tris_v = self.live_tris(v);
        let shared: Vec<u32> = tris_u
            .iter()
            .copied()
            .filter(|&t| self.tris[t as usize].contains(&v))
            .collect();
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }

        let mut opposite: Vec<u32> = shared
            .iter()
            .map(|&t| {
                *self.tris[t as usize]
                    .iter()
                    .find(|&&x| x != u && x != v)
                    .expect("triangle has three distinct vertices")
            })
            .collect();
        opposite.sort_unstable();
        opposite.dedup();
        if opposite.len() != shared.len() {
            return false;
        }
        let nu = self.neighbours(&tris_u, u);
        let nv = self.neighbours(&tris_v, v);
        let common: Vec<u32> = nu
            .iter()
            .copied()
            .filter(|x| *x != v && nv.binary_search(x).is_ok())
            .collect();
        if common != opposite {
            return false;
        }
        if shared.len() == 2 && self.on_boundary(&tris_u, u) && self.on_boundary(&tris_v, v) {
            return false;
        }

        for &t in &tris_v {
            if shared.contains(&t) {
                continue;
            }
            let others: Vec<u32> = self.tris[t as usize]
                .iter()
                .copied()
                .filter(|&x| x != v)
                .collect();
            let duplicate = tris_u.iter().any(|&s| {
                !shared.contains(&s) && others.iter().all(|o| self.tris[s as usize].contains(o))
            });
            if duplicate {
                return false;
            }
        }

        for &t in tris_u.iter().chain(&tris_v) {
            if shared.contains(&t) {
                continue;
            }
            let tri = self.tris[t as usize];
            let old = tri.map(|x| self.pos[x as usize]);
            let new = tri.map(|x| {
                if x == u || x == v {
                    p
                } else {
                    self.pos[x as usize]
                }
            });
            let n0 = cross(sub(old[1], old[0]), sub(old[2], old[0]));
            let n1 = cross(sub(new[1], new[0]), sub(new[2], new[0]));
            let longest = [
                sub(new[1], new[0]),
                sub(new[2], new[1]),
                sub(new[0], new[2]),
            ]
            .iter()
            .map(|e| dot(*e, *e))
            .fold(0.0, f64::max);
            if norm(n1) <= 1e-10 * longest || dot(n0, n1) <= 0.0 {
                return false;
            }
        }

        for &t in &shared {
            self.tri_alive[t as usize] = false;
        }
        self.alive -= shared.len();
        for &t in &tris_v {
            if self.tri_alive[t as usize] {
                for x in self.tris[t as usize].iter_mut() {
                    if *x == v {
                        *x = u;
                    }
                }
            }
        }
        let (ui, vi) = (u as usize, v as usize);
        self.pos[ui] = p;
        self.quadrics[ui] = q_add(&self.quadrics[ui], &self.quadrics[vi]);
        self.vert_alive[vi] = false;
        self.vert_tris[vi].clear();
        let mut merged: Vec<u32> = tris_u
            .into_iter()
            .chain(tris_v)
            .filter(|&t| self.tri_alive[t as usize])
            .collect();
        merged.sort_unstable();
        merged.dedup();
        self.vert_tris[ui] = merged;
        self.stamp[ui] += 1;

        let around = self.neighbours(&self.vert_tris[ui].clone(), u);
        for w in around {
            self.push(u, w);
        }
        true
    }

    fn neighbours(&self, tris: &[u32], v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = tris
            .iter()
            .flat_map(|&t| self.tris[t as usize])
            .filter(|&x| x != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn on_boundary(&self, tris: &[u32], v: u32) -> bool {
        let mut ends: Vec<u32> = tris
            .iter()
            .flat_map(|&t| self.tris[t as usize])
            .filter(|&x| x != v)
            .collect();
        ends.sort_unstable();
        ends.chunk_by(|a, b| a == b).any(|run| run.len() == 1)
    }

    fn into_mesh(self) -> TriMesh {
        let mut remap = alloc::vec![u32::MAX; self.pos.len()];
        let live: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, a)| **a)
            .map(|(t, _)| *t)
            .collect();
        for tri in &live {
            for &x in tri {
                remap[x as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        for (i, r) in remap.iter_mut().enumerate() {
            if *r == 0 {
                *r = vertices.len() as u32;
                vertices.push(self.pos[i]);
            }
        }
        let triangles = live.iter().map(|t| t.map(|x| remap[x as usize])).collect();
        TriMesh::from_parts(vertices, triangles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::measure::component_count;

    #[test]
    fn no_op_when_target_not_below_count() {
        let m = TriMesh::icosphere(1.0, 1);
        assert_eq!(decimate(&m, 80).unwrap(), m);
        assert_eq!(decimate(&m, 1000).unwrap(), m);
    }

    #[test]
    fn target_below_four_is_rejected() {
        assert_eq!(
            decimate(&TriMesh::unit_cube(), 3),
            Err(DecimateError::TargetTooSmall(3))
        );
    }

    #[test]
    fn cube_to_four() {
        let out = decimate(&TriMesh::unit_cube(), 4).unwrap();
        assert!(out.triangle_count() >= 4 && out.triangle_count() < 12);
        assert_eq!(component_count(&out), 1);
    }

    #[test]
    fn sphere_reaches_target_and_stays_closed() {
        let out = decimate(&TriMesh::icosphere(1.0, 3), 320).unwrap();
        assert!(out.triangle_count() <= 320);
        // Closed genus-0 surface: V - E + F = 2 with E = 3F/2.
        assert_eq!(2 * out.vertex_count(), out.triangle_count() + 4);
    }

    #[test]
    fn open_grid_keeps_its_border() {
        let cube = TriMesh::subdivided_cube(6);
        // Drop the z = 1 face to get an open box.
        let tris: Vec<[u32; 3]> = cube
            .triangles()
            .iter()
            .copied()
            .filter(|t| t.iter().any(|&v| cube.vertices()[v as usize][2] < 1.0))
            .collect();
        let open = TriMesh::new(cube.vertices().to_vec(), tris).unwrap();
        let out = decimate(&open, 40).unwrap();
        let max_z = out.vertices().iter().map(|v| v[2]).fold(f64::MIN, f64::max);
        assert!((max_z - 1.0).abs() < 1e-6, "{max_z}");
    }
}
