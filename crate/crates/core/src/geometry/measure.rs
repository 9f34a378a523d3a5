use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mesh::{cross, dot, norm, sub, MeshError, TriMesh};
use crate::math;
use crate::scenario::Vec3;

/// Triangles with less area than this (m²) count as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Geometric measurements of a mesh, in fixed feature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub triangle_count: u64,
    pub vertex_count: u64,
    pub bbox_diagonal: f64,
    pub surface_area: f64,
    pub mean_triangle_area: f64,
    /// Degrees between the normals of triangles sharing an edge.
    pub mean_dihedral_angle: f64,
    pub degenerate_fraction: f64,
    pub component_count: u64,
}

impl MeasurementVector {
    pub const LEN: usize = 8;

    pub fn to_features(&self) -> Vec<f64> {
        alloc::vec![
            self.triangle_count as f64,
            self.vertex_count as f64,
            self.bbox_diagonal,
            self.surface_area,
            self.mean_triangle_area,
            self.mean_dihedral_angle,
            self.degenerate_fraction,
            self.component_count as f64,
        ]
    }
}

pub fn compute_measurements(m: &TriMesh) -> Result<MeasurementVector, MeshError> {
    if m.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let n = m.triangle_count();
    let areas: Vec<f64> = (0..n).map(|t| m.triangle_area(t)).collect();
    let surface_area: f64 = areas.iter().sum();
    let degenerate = areas.iter().filter(|a| **a < DEGENERATE_AREA).count();

    let normals: Vec<Option<Vec3>> = (0..n)
        .map(|t| {
            if areas[t] < DEGENERATE_AREA {
                return None;
            }
            let [a, b, c] = m.corners(t);
            let nrm = cross(sub(b, a), sub(c, a));
            let len = norm(nrm);
            Some([nrm[0] / len, nrm[1] / len, nrm[2] / len])
        })
        .collect();

    let mut edges: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (t, tri) in m.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut angle_sum = 0.0;
    let mut angle_count = 0usize;
    for tris in edges.values() {
        if let [t0, t1] = tris[..] {
            if let (Some(n0), Some(n1)) = (normals[t0], normals[t1]) {
                angle_sum += math::acos(dot(n0, n1).clamp(-1.0, 1.0)).to_degrees();
                angle_count += 1;
            }
        }
    }

    Ok(MeasurementVector {
        triangle_count: n as u64,
        vertex_count: m.vertex_count() as u64,
        bbox_diagonal: m.bbox_diagonal(),
        surface_area,
        mean_triangle_area: surface_area / n as f64,
        mean_dihedral_angle: if angle_count == 0 {
            0.0
        } else {
            angle_sum / angle_count as f64
        },
        degenerate_fraction: degenerate as f64 / n as f64,
        component_count: component_count(m) as u64,
    })
}

/// Connected components among vertices that belong to some triangle.
pub fn component_count(m: &TriMesh) -> usize {
    let mut uf = UnionFind::new(m.vertex_count());
    let mut used = alloc::vec![false; m.vertex_count()];
    for &[a, b, c] in m.triangles() {
        uf.union(a as usize, b as usize);
        uf.union(b as usize, c as usize);
        for v in [a, b, c] {
            used[v as usize] = true;
        }
    }
    (0..m.vertex_count())
        .filter(|&v| used[v] && uf.find(v) == v)
        .count()
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: alloc::vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_dihedral_mix() {
        // 6 face diagonals are flat, the 12 cube edges are right angles.
        let mv = compute_measurements(&TriMesh::unit_cube()).unwrap();
        assert!((mv.mean_dihedral_angle - 90.0 * 12.0 / 18.0).abs() < 1e-9);
        assert_eq!(mv.component_count, 1);
    }

    #[test]
    fn two_components() {
        let m = TriMesh::unit_cube().merged(&TriMesh::unit_cube().translated([3.0, 0.0, 0.0]));
        assert_eq!(component_count(&m), 2);
    }

    #[test]
    fn empty_is_error() {
        let m = TriMesh::new(alloc::vec![], alloc::vec![]).unwrap();
        assert_eq!(compute_measurements(&m), Err(MeshError::EmptyMesh));
    }
}
