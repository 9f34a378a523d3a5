use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Connection, StateKey, World};
use crate::process::{StatusMap, StepStatus};
use crate::scenario::{Value, Vec3};

/// Observable difference between two states.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vars: BTreeMap<StateKey, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub connected: Vec<Connection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disconnected: Vec<Connection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub moved: BTreeMap<String, Vec3>,
    /// Process id to the steps whose status changed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub steps: BTreeMap<String, BTreeMap<String, StepStatus>>,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
            && self.connected.is_empty()
            && self.disconnected.is_empty()
            && self.moved.is_empty()
            && self.steps.is_empty()
    }

    pub(super) fn between(
        old: &World,
        old_steps: &BTreeMap<String, StatusMap>,
        new: &World,
        new_steps: &BTreeMap<String, StatusMap>,
    ) -> Self {
        let mut d = StateDelta::default();
        for (inst, vars) in &new.vars {
            for (var, value) in vars {
                let key = StateKey::new(inst, var);
                if old.value(&key) != Some(value) {
                    d.vars.insert(key, value.clone());
                }
            }
        }
        d.connected = new
            .connections
            .difference(&old.connections)
            .cloned()
            .collect();
        d.disconnected = old
            .connections
            .difference(&new.connections)
            .cloned()
            .collect();
        for (inst, t) in &new.transforms {
            if old.transforms.get(inst).map(|o| o.position) != Some(t.position) {
                d.moved.insert(inst.clone(), t.position);
            }
        }
        for (pid, map) in new_steps {
            let before = old_steps.get(pid);
            let changed: BTreeMap<String, StepStatus> = map
                .iter()
                .filter(|(id, rec)| before.and_then(|b| b.status(id)) != Some(rec.status))
                .map(|(id, rec)| (id.clone(), rec.status))
                .collect();
            if !changed.is_empty() {
                d.steps.insert(pid.clone(), changed);
            }
        }
        d
    }
}

/// What a tick produced: channel values and what changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick_index: u64,
    pub clock: f64,
    pub graph: BTreeMap<String, f64>,
    pub text: BTreeMap<String, f64>,
    /// Steps that completed during this tick.
    pub completed_steps: Vec<String>,
    pub changed: BTreeMap<StateKey, Value>,
}
