//! Step status bookkeeping and condition evaluation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Condition, Procedure, ProcessModel, SocketRef, Step, StepRef};
use crate::scenario::{Aabb, Value, Vec3};

/// Slack for floating-point clock differences when testing `wait`; the
/// boundary itself is closed.
const WAIT_EPSILON: f64 = 1e-9;
const SCALAR_EQ_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Blocked,
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub status: StepStatus,
    /// Clock when the step became active; `wait` conditions measure from here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activated_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activated_tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_tick: Option<u64>,
}

impl StepRecord {
    fn blocked() -> Self {
        Self {
            status: StepStatus::Blocked,
            activated_at: None,
            activated_tick: None,
            completed_tick: None,
        }
    }
}

/// Status of every step of one process model, keyed by step id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatusMap(BTreeMap<String, StepRecord>);

impl StatusMap {
    pub fn get(&self, id: &str) -> Option<&StepRecord> {
        self.0.get(id)
    }

    pub fn status(&self, id: &str) -> Option<StepStatus> {
        self.0.get(id).map(|r| r.status)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &StepRecord)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complete_ids(&self) -> BTreeSet<&str> {
        self.0
            .iter()
            .filter(|(_, r)| r.status == StepStatus::Complete)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Overrides one record. Meant for building test inputs.
    pub fn set(&mut self, id: &str, record: StepRecord) {
        self.0.insert(id.to_string(), record);
    }

    fn set_status(&mut self, id: &str, status: StepStatus, now: SimTime) {
        let r = self.0.get_mut(id).expect("status map covers every step");
        r.status = status;
        match status {
            StepStatus::Active => {
                r.activated_at = Some(now.seconds);
                r.activated_tick = Some(now.tick);
            }
            StepStatus::Complete => r.completed_tick = Some(now.tick),
            StepStatus::Blocked => {}
        }
    }
}

/// Point on the session timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTime {
    pub tick: u64,
    pub seconds: f64,
}

/// Read access to the world state that conditions inspect.
pub trait WorldView {
    fn value(&self, instance: &str, var: &str) -> Option<&Value>;
    fn connected(&self, a: &SocketRef, b: &SocketRef) -> bool;
    fn position(&self, instance: &str) -> Option<Vec3>;
    fn zone(&self, id: &str) -> Option<Aabb>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("inconsistent status for step `{step}`: {reason}")]
    InconsistentStatus { step: String, reason: &'static str },
}

/// Every step Blocked. `advance` then activates the root.
pub fn initial_statuses(model: &ProcessModel) -> StatusMap {
    StatusMap(
        model
            .steps()
            .into_iter()
            .map(|s| (s.id().to_string(), StepRecord::blocked()))
            .collect(),
    )
}

/// Pure predicate over the world. `activated_at` is when the owning step
/// became active.
pub fn evaluate_condition(
    c: &Condition,
    world: &impl WorldView,
    now: f64,
    activated_at: f64,
) -> bool {
    match c {
        Condition::StateEquals {
            instance,
            var,
            value,
        } => match (world.value(instance, var), value) {
            (Some(Value::Scalar(a)), Value::Scalar(b)) => (a - b).abs() <= SCALAR_EQ_TOLERANCE,
            (Some(current), expected) => current == expected,
            (None, _) => false,
        },
        Condition::StateInRange {
            instance,
            var,
            lo,
            hi,
        } => world
            .value(instance, var)
            .and_then(Value::as_scalar)
            .is_some_and(|v| v >= *lo && v <= *hi),
        Condition::Connected { a, b } => world.connected(a, b),
        Condition::Placed {
            instance,
            zone,
            tolerance,
        } => match (world.position(instance), world.zone(zone)) {
            (Some(p), Some(z)) => z.contains_point(p, *tolerance),
            _ => false,
        },
        Condition::Wait { seconds } => now - activated_at >= seconds - WAIT_EPSILON,
        Condition::All { conditions } => conditions
            .iter()
            .all(|c| evaluate_condition(c, world, now, activated_at)),
        Condition::Any { conditions } => conditions
            .iter()
            .any(|c| evaluate_condition(c, world, now, activated_at)),
    }
}

/// Runs the step rules to a fixpoint: satisfied active instructions
/// complete, ordered procedures activate their next step, unordered ones
/// keep all incomplete children active, and a procedure whose children are
/// all complete completes. Complete steps never revert.
pub fn advance(
    statuses: &StatusMap,
    model: &ProcessModel,
    world: &impl WorldView,
    now: SimTime,
) -> Result<StatusMap, ProcessError> {
    check_consistency(statuses, model)?;
    let mut out = statuses.clone();
    while settle(&model.root, &mut out, world, now) {}
    Ok(out)
}

fn settle(p: &Procedure, st: &mut StatusMap, world: &impl WorldView, now: SimTime) -> bool {
    let mut changed = false;
    match st.status(&p.id) {
        Some(StepStatus::Complete) | None => return false,
        Some(StepStatus::Blocked) => {
            st.set_status(&p.id, StepStatus::Active, now);
            changed = true;
        }
        Some(StepStatus::Active) => {}
    }

    for step in &p.steps {
        let id = step.id();
        if st.status(id) == Some(StepStatus::Complete) {
            continue;
        }
        if st.status(id) == Some(StepStatus::Blocked) {
            st.set_status(id, StepStatus::Active, now);
            changed = true;
        }
        changed |= match step {
            Step::Procedure(child) => settle(child, st, world, now),
            Step::Instruction(ins) => {
                let since = st
                    .get(id)
                    .and_then(|r| r.activated_at)
                    .unwrap_or(now.seconds);
                if evaluate_condition(&ins.condition, world, now.seconds, since) {
                    st.set_status(id, StepStatus::Complete, now);
                    true
                } else {
                    false
                }
            }
        };
        if p.ordered && st.status(id) != Some(StepStatus::Complete) {
            break;
        }
    }

    if p.steps
        .iter()
        .all(|s| st.status(s.id()) == Some(StepStatus::Complete))
    {
        st.set_status(&p.id, StepStatus::Complete, now);
        changed = true;
    }
    changed
}

fn inconsistent(step: &str, reason: &'static str) -> ProcessError {
    ProcessError::InconsistentStatus {
        step: step.to_string(),
        reason,
    }
}

fn check_consistency(st: &StatusMap, model: &ProcessModel) -> Result<(), ProcessError> {
    let steps = model.steps();
    if steps.len() != st.len() {
        return Err(inconsistent(
            &model.id,
            "status map does not cover exactly the model's steps",
        ));
    }
    for s in &steps {
        if st.get(s.id()).is_none() {
            return Err(inconsistent(s.id(), "missing from status map"));
        }
    }
    for s in steps {
        let StepRef::Procedure(p) = s else { continue };
        let own = st.status(&p.id).unwrap_or(StepStatus::Blocked);
        let children: Vec<StepStatus> = p
            .steps
            .iter()
            .map(|c| st.status(c.id()).unwrap_or(StepStatus::Blocked))
            .collect();
        match own {
            StepStatus::Blocked => {
                if children.iter().any(|c| *c != StepStatus::Blocked) {
                    return Err(inconsistent(
                        &p.id,
                        "blocked procedure has started children",
                    ));
                }
            }
            StepStatus::Complete => {
                if children.iter().any(|c| *c != StepStatus::Complete) {
                    return Err(inconsistent(
                        &p.id,
                        "complete procedure has incomplete children",
                    ));
                }
            }
            StepStatus::Active if p.ordered => {
                let done = children
                    .iter()
                    .take_while(|c| **c == StepStatus::Complete)
                    .count();
                let rest = &children[done..];
                if rest.iter().skip(1).any(|c| *c != StepStatus::Blocked) {
                    return Err(inconsistent(
                        &p.id,
                        "ordered procedure has a step running ahead of the chain",
                    ));
                }
            }
            StepStatus::Active => {}
        }
    }
    Ok(())
}
