//! Synthetic training data.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::convert::{
    plan_features, quality_features, Plan, GATE_CONVERT, GATE_PASS, QUALITY_ACCEPT,
    QUALITY_ITERATE, QUALITY_LIMIT,
};
use super::decimate::{decimate, MIN_TARGET};
use super::forest::LabeledSample;
use super::measure::compute_measurements;
use super::mesh::{normalize, scale, MeshError, TriMesh};
use super::quality::quality_error;
use crate::math;

/// Two classes in the plane separated by the line `x = y` with a clear
/// band of width `margin`, then jittered by Gaussian noise of `sigma`.
pub fn margin_dataset(n: usize, margin: f64, sigma: f64, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: f64 = rng.random_range(-4.0..4.0);
        let y: f64 = rng.random_range(-4.0..4.0);
        let signed = (x - y) / math::sqrt(2.0);
        if signed.abs() < margin / 2.0 {
            continue;
        }
        let label = u32::from(signed > 0.0);
        out.push(LabeledSample::new(
            alloc::vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)],
            label,
        ));
    }
    out
}

/// Labeled samples for the three conversion forests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSet {
    pub accept: Vec<LabeledSample>,
    pub plan: Vec<LabeledSample>,
    pub quality: Vec<LabeledSample>,
}

impl SyntheticSet {
    pub fn extend(&mut self, other: SyntheticSet) {
        self.accept.extend(other.accept);
        self.plan.extend(other.plan);
        self.quality.extend(other.quality);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTrial {
    pub plan: Plan,
    pub steps: usize,
    pub triangles: usize,
    pub relative_error: f64,
}

impl PlanTrial {
    fn meets(&self, budget: usize) -> bool {
        self.triangles <= budget && self.relative_error <= QUALITY_LIMIT
    }
}

/// Runs every plan to completion and returns the cheapest one that meets
/// the budget and the quality limit: fewest rounds, then the milder
/// ratio. Falls back to the lowest-error plan that reaches the budget,
/// then to the most aggressive one.
pub fn best_plan(trials: &[PlanTrial], budget: usize) -> Plan {
    let meeting = trials
        .iter()
        .filter(|t| t.meets(budget))
        .min_by(|a, b| a.steps.cmp(&b.steps).then(a.plan.cmp(&b.plan)));
    if let Some(t) = meeting {
        return t.plan;
    }
    trials
        .iter()
        .filter(|t| t.triangles <= budget)
        .min_by(|a, b| {
            a.relative_error
                .total_cmp(&b.relative_error)
                .then(a.plan.cmp(&b.plan))
        })
        .map_or(Plan::Aggressive, |t| t.plan)
}

/// Labels one `(mesh, budget)` pair: one accept sample, and when the mesh
/// is over budget one plan sample plus a quality sample for every
/// intermediate result of every plan.
pub fn label_mesh(
    m: &TriMesh,
    budget: usize,
    max_iter: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(SyntheticSet, Vec<PlanTrial>), MeshError> {
    let mut set = SyntheticSet::default();
    let source = compute_measurements(m)?;
    let diag = source.bbox_diagonal;
    let features = plan_features(&source, budget);
    let n = m.triangle_count();
    set.accept.push(LabeledSample::new(
        features.clone(),
        if n <= budget { GATE_PASS } else { GATE_CONVERT },
    ));
    if n <= budget {
        set.quality.push(LabeledSample::new(
            quality_features(&source, budget, 0.0, diag),
            QUALITY_ACCEPT,
        ));
        return Ok((set, Vec::new()));
    }

    let mut trials = Vec::new();
    for plan in Plan::ALL {
        let mut cur = m.clone();
        let mut steps = 0;
        let mut error = 0.0;
        while cur.triangle_count() > budget && steps < max_iter {
            let target = plan.target(cur.triangle_count(), budget);
            let next = decimate(&cur, target).map_err(|_| MeshError::EmptyMesh)?;
            if next.triangle_count() == cur.triangle_count() {
                break;
            }
            steps += 1;
            error = quality_error(m, &next, n_samples, seed)?;
            let meas = compute_measurements(&next)?;
            let ok = next.triangle_count() <= budget && error / diag <= QUALITY_LIMIT;
            set.quality.push(LabeledSample::new(
                quality_features(&meas, budget, error, diag),
                if ok { QUALITY_ACCEPT } else { QUALITY_ITERATE },
            ));
            cur = next;
        }
        trials.push(PlanTrial {
            plan,
            steps,
            triangles: cur.triangle_count(),
            relative_error: error / diag,
        });
    }
    set.plan.push(LabeledSample::new(
        features,
        best_plan(&trials, budget).label(),
    ));
    Ok((set, trials))
}

/// The source meshes the fixture forests learn from: spheres, ellipsoids,
/// bumpy spheres and subdivided boxes over a range of resolutions.
pub fn training_meshes(seed: u64) -> Vec<TriMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for sub in 2..=5 {
        out.push(TriMesh::icosphere(1.0, sub));
        out.push(TriMesh::icosphere(0.3, sub).scaled([1.0, 1.6, 0.7]));
        let bumpy = TriMesh::icosphere(1.0, sub);
        let jitter = Normal::new(1.0, 0.01).expect("valid");
        let verts = bumpy
            .vertices()
            .iter()
            .map(|v| scale(normalize(*v), jitter.sample(&mut rng)))
            .collect();
        out.push(TriMesh::new(verts, bumpy.triangles().to_vec()).expect("same topology"));
    }
    for n in [4, 8, 16, 32] {
        out.push(TriMesh::subdivided_cube(n).scaled([2.0, 1.0, 0.5]));
    }
    out
}

pub const TRAINING_BUDGETS: [usize; 9] = [16, 50, 150, 400, 1000, 2000, 3000, 6000, 12000];

/// Full labeled set over [`training_meshes`] x [`TRAINING_BUDGETS`].
pub fn synthetic_training_set(seed: u64, n_samples: usize) -> Result<SyntheticSet, MeshError> {
    let mut set = SyntheticSet::default();
    for m in training_meshes(seed) {
        for &budget in &TRAINING_BUDGETS {
            if budget < MIN_TARGET {
                continue;
            }
            let (s, _) = label_mesh(&m, budget, 8, n_samples, seed)?;
            set.extend(s);
        }
    }
    Ok(set)
}
