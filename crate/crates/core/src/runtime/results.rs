use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::SessionState;
use crate::process::StepStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub status: StepStatus,
    pub completion_tick: Option<u64>,
}

/// Per-step outcome of a session, for instructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsSummary {
    pub scenario_id: String,
    pub completed: bool,
    pub total_ticks: u64,
    pub event_count: u64,
    /// Process id to step id to result.
    pub steps: BTreeMap<String, BTreeMap<String, StepResult>>,
}

impl ResultsSummary {
    pub fn of(s: &SessionState) -> Self {
        let steps = s
            .statuses()
            .iter()
            .map(|(pid, map)| {
                let per_step = map
                    .iter()
                    .map(|(id, rec)| {
                        (
                            id.clone(),
                            StepResult {
                                status: rec.status,
                                completion_tick: rec.completed_tick,
                            },
                        )
                    })
                    .collect();
                (pid.clone(), per_step)
            })
            .collect();
        Self {
            scenario_id: s.scenario().id.clone(),
            completed: s.is_complete(),
            total_ticks: s.tick_index(),
            event_count: s.event_log().len() as u64,
            steps,
        }
    }
}
