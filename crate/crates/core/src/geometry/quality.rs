use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::{add, dot, scale, sub, MeshError, TriMesh};
use crate::math;
use crate::scenario::Vec3;

/// Symmetric mean surface distance in meters: `n_samples` area-weighted
/// points are drawn on each mesh and measured against the other, and the
/// two means are averaged.
pub fn quality_error(
    original: &TriMesh,
    simplified: &TriMesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64, MeshError> {
    if original.is_empty() || simplified.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    if original == simplified {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forward = mean_distance(original, &Bvh::build(simplified), n_samples, &mut rng);
    rng.set_stream(1);
    let backward = mean_distance(simplified, &Bvh::build(original), n_samples, &mut rng);
    Ok(0.5 * (forward + backward))
}

fn mean_distance(from: &TriMesh, to: &Bvh<'_>, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sampler = SurfaceSampler::new(from);
    let total: f64 = (0..n)
        .map(|_| math::sqrt(to.closest_distance_sq(sampler.sample(rng))))
        .sum();
    total / n as f64
}

struct SurfaceSampler<'a> {
    mesh: &'a TriMesh,
    cdf: Vec<f64>,
}

impl<'a> SurfaceSampler<'a> {
    fn new(mesh: &'a TriMesh) -> Self {
        let mut acc = 0.0;
        let cdf = (0..mesh.triangle_count())
            .map(|t| {
                acc += mesh.triangle_area(t);
                acc
            })
            .collect();
        Self { mesh, cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let total = *self.cdf.last().expect("non-empty");
        let t = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            self.cdf
                .partition_point(|c| *c <= r)
                .min(self.cdf.len() - 1)
        } else {
            rng.random_range(0..self.cdf.len())
        };
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = math::sqrt(r1);
        let [a, b, c] = self.mesh.corners(t);
        add(
            add(scale(a, 1.0 - s), scale(b, s * (1.0 - r2))),
            scale(c, s * r2),
        )
    }
}

/// Bounding volume hierarchy over triangles for closest-point queries.
pub(crate) struct Bvh<'a> {
    mesh: &'a TriMesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start+count` into `order`. Inner: children at `start`
    /// and `start + 1`, `count == 0`.
    start: u32,
    count: u32,
}

const LEAF_SIZE: usize = 4;

impl<'a> Bvh<'a> {
    pub(crate) fn build(mesh: &'a TriMesh) -> Self {
        let mut order: Vec<u32> = (0..mesh.triangle_count() as u32).collect();
        let centroids: Vec<Vec3> = (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                scale(add(add(a, b), c), 1.0 / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            mesh,
            nodes: Vec::new(),
            order: Vec::new(),
        };
        bvh.nodes.push(Node {
            lo: [0.0; 3],
            hi: [0.0; 3],
            start: 0,
            count: 0,
        });
        let mut stack = alloc::vec![(0usize, 0usize, order.len())];
        while let Some((node, begin, end)) = stack.pop() {
            let (lo, hi) = bvh.bounds_of(&order[begin..end]);
            bvh.nodes[node].lo = lo;
            bvh.nodes[node].hi = hi;
            if end - begin <= LEAF_SIZE {
                bvh.nodes[node].start = begin as u32;
                bvh.nodes[node].count = (end - begin) as u32;
                continue;
            }
            let ext = sub(hi, lo);
            let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
                0
            } else if ext[1] >= ext[2] {
                1
            } else {
                2
            };
            let mid = (begin + end) / 2;
            order[begin..end].select_nth_unstable_by(mid - begin, |&x, &y| {
                centroids[x as usize][axis]
                    .total_cmp(&centroids[y as usize][axis])
                    .then(x.cmp(&y))
            });
            let left = bvh.nodes.len();
            for _ in 0..2 {
                bvh.nodes.push(Node {
                    lo: [0.0; 3],
                    hi: [0.0; 3],
                    start: 0,
                    count: 0,
                });
            }
            bvh.nodes[node].start = left as u32;
            stack.push((left, begin, mid));
            stack.push((left + 1, mid, end));
        }
        bvh.order = order;
        bvh
    }

    fn bounds_of(&self, tris: &[u32]) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &t in tris {
            for p in self.mesh.corners(t as usize) {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        (lo, hi)
    }

    pub(crate) fn closest_distance_sq(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = alloc::vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if box_distance_sq(node, p) >= best {
                continue;
            }
            if node.count > 0 {
                let range = node.start as usize..(node.start + node.count) as usize;
                for &t in &self.order[range] {
                    let [a, b, c] = self.mesh.corners(t as usize);
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = sub(p, q);
                    best = best.min(dot(d, d));
                }
            } else {
                let (l, r) = (node.start as usize, node.start as usize + 1);
                let (dl, dr) = (
                    box_distance_sq(&self.nodes[l], p),
                    box_distance_sq(&self.nodes[r], p),
                );
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

fn box_distance_sq(n: &Node, p: Vec3) -> f64 {
    let mut d = 0.0;
    for ((lo, hi), x) in n.lo.iter().zip(&n.hi).zip(&p) {
        let e = (lo - x).max(0.0).max(x - hi);
        d += e * e;
    }
    d
}

/// Closest point on triangle `abc` to `p` by Voronoi region tests.
pub(crate) fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // Degenerate triangle: fall back to the nearest corner.
        return [a, b, c]
            .into_iter()
            .min_by(|x, y| dot(sub(p, *x), sub(p, *x)).total_cmp(&dot(sub(p, *y), sub(p, *y))))
            .expect("three corners");
    }
    let v = vb / denom;
    let w = vc / denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}
