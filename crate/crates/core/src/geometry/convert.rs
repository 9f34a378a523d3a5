//! Classifier-driven conversion loop.
//!
//! 1. The accept forest decides pass-through vs convert.
//! 2. While over budget, the plan forest picks a decimation ratio.
//! 3. The quality forest looks at the result and accepts or asks for
//!    another round.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decimate::{decimate, DecimateError, MIN_TARGET};
use super::forest::{ForestError, RandomForest};
use super::measure::{compute_measurements, MeasurementVector};
use super::mesh::{MeshError, TriMesh};
use super::quality::quality_error;

/// Relative error the synthetic labels treat as acceptable.
pub const QUALITY_LIMIT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plan {
    Mild,
    Medium,
    Aggressive,
}

impl Plan {
    pub const ALL: [Plan; 3] = [Plan::Mild, Plan::Medium, Plan::Aggressive];

    pub fn ratio(self) -> f64 {
        match self {
            Plan::Mild => 0.75,
            Plan::Medium => 0.5,
            Plan::Aggressive => 0.25,
        }
    }

    pub fn label(self) -> u32 {
        self as u32
    }

    pub fn from_label(l: u32) -> Option<Plan> {
        Plan::ALL.get(l as usize).copied()
    }

    /// Decimation target for a mesh with `current` triangles, never below
    /// the budget.
    pub fn target(self, current: usize, budget: usize) -> usize {
        let scaled = (current as f64 * self.ratio()) as usize;
        scaled.max(budget)
    }
}

/// Accept-forest classes.
pub const GATE_PASS: u32 = 0;
pub const GATE_CONVERT: u32 = 1;
/// Quality-forest classes.
pub const QUALITY_ITERATE: u32 = 0;
pub const QUALITY_ACCEPT: u32 = 1;

pub struct Forests {
    pub accept: RandomForest,
    pub plan: RandomForest,
    pub quality: RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertParams {
    pub budget: usize,
    pub max_iter: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl ConvertParams {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            max_iter: 8,
            n_samples: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    PassThrough,
    Decimate {
        plan: Plan,
        target: usize,
    },
    /// Within budget already; only the quality check ran.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    /// Measurements of the mesh the action was chosen for.
    pub measurements: MeasurementVector,
    pub action: Action,
    pub triangles_after: usize,
    /// Against the original input.
    pub quality_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    IterationLimit,
    NoProgress,
    QualityRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Failed { reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub budget: usize,
    pub source_triangles: usize,
    pub iterations: Vec<Iteration>,
    pub outcome: Outcome,
}

impl ConversionReport {
    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvertError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("budget must be at least {MIN_TARGET} triangles, got {0}")]
    BudgetTooSmall(usize),
    #[error("{forest} forest: {source}")]
    Forest {
        forest: &'static str,
        source: ForestError,
    },
}

impl From<DecimateError> for ConvertError {
    fn from(e: DecimateError) -> Self {
        match e {
            DecimateError::Mesh(m) => ConvertError::Mesh(m),
            DecimateError::TargetTooSmall(t) => ConvertError::BudgetTooSmall(t),
        }
    }
}

/// Features seen by the accept and plan forests.
pub fn plan_features(m: &MeasurementVector, budget: usize) -> Vec<f64> {
    let mut f = m.to_features();
    f.push(m.triangle_count as f64 / budget as f64);
    f
}

/// Features seen by the quality forest: the result's plan features plus
/// the quality error relative to the original's bounding-box diagonal.
pub fn quality_features(
    result: &MeasurementVector,
    budget: usize,
    error: f64,
    original_diag: f64,
) -> Vec<f64> {
    let mut f = plan_features(result, budget);
    f.push(if original_diag > 0.0 {
        error / original_diag
    } else {
        0.0
    });
    f
}

pub fn convert(
    m: &TriMesh,
    forests: &Forests,
    params: &ConvertParams,
) -> Result<(TriMesh, ConversionReport), ConvertError> {
    if m.is_empty() {
        return Err(MeshError::EmptyMesh.into());
    }
    let budget = params.budget;
    if budget < MIN_TARGET {
        return Err(ConvertError::BudgetTooSmall(budget));
    }
    let ask = |forest: &RandomForest, name: &'static str, x: &[f64]| {
        forest
            .classify(x)
            .map(|c| c.label)
            .map_err(|source| ConvertError::Forest {
                forest: name,
                source,
            })
    };

    let source = compute_measurements(m)?;
    let mut report = ConversionReport {
        budget,
        source_triangles: m.triangle_count(),
        iterations: Vec::new(),
        outcome: Outcome::Accepted,
    };

    let gate = ask(&forests.accept, "accept", &plan_features(&source, budget))?;
    if gate == GATE_PASS && m.triangle_count() <= budget {
        report.iterations.push(Iteration {
            measurements: source,
            action: Action::PassThrough,
            triangles_after: m.triangle_count(),
            quality_error: 0.0,
        });
        return Ok((m.clone(), report));
    }

    let mut current = m.clone();
    let mut current_meas = source;
    for _ in 0..params.max_iter {
        let n = current.triangle_count();
        let (next, action) = if n > budget {
            let label = ask(&forests.plan, "plan", &plan_features(&current_meas, budget))?;
            let plan = Plan::from_label(label).unwrap_or(Plan::Aggressive);
            let target = plan.target(n, budget);
            (
                decimate(&current, target)?,
                Action::Decimate { plan, target },
            )
        } else {
            (current.clone(), Action::Keep)
        };

        let after = next.triangle_count();
        let error = quality_error(m, &next, params.n_samples, params.seed)?;
        let next_meas = compute_measurements(&next)?;
        report.iterations.push(Iteration {
            measurements: current_meas,
            action: action.clone(),
            triangles_after: after,
            quality_error: error,
        });

        if matches!(action, Action::Decimate { .. }) && after == n {
            report.outcome = Outcome::Failed {
                reason: FailureReason::NoProgress,
            };
            return Ok((next, report));
        }
        if after <= budget {
            let verdict = ask(
                &forests.quality,
                "quality",
                &quality_features(&next_meas, budget, error, source.bbox_diagonal),
            )?;
            report.outcome = if verdict == QUALITY_ACCEPT {
                Outcome::Accepted
            } else {
                Outcome::Failed {
                    reason: FailureReason::QualityRejected,
                }
            };
            return Ok((next, report));
        }
        current = next;
        current_meas = next_meas;
    }
    report.outcome = Outcome::Failed {
        reason: FailureReason::IterationLimit,
    };
    Ok((current, report))
}
