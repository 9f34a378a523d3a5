//! Deterministic single-session execution.
//!
//! A session advances in fixed ticks of `tick_seconds`. Interaction events
//! are applied between ticks and stamped with the number of ticks executed
//! so far, which gives the total order replay relies on. Every failing
//! operation leaves the session exactly as it was.

mod delta;
mod replay;
mod results;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{apply_bindings, BindingError, EvalContext};
use crate::math;
use crate::process::{
    advance, initial_statuses, ProcessError, SimTime, SocketRef, StatusMap, StepStatus, WorldView,
};
use crate::report::ValidationReport;
use crate::scenario::{
    content_digest, validate, Aabb, InteractionKind, ScenarioDefinition, Transform, Value, Vec3,
};

pub use delta::{StateDelta, TelemetryFrame};
pub use replay::{records_of, replay, LogRecord};
pub use results::{ResultsSummary, StepResult};

/// `instance.var`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StateKey {
    pub instance: String,
    pub var: String,
}

impl StateKey {
    pub fn new(instance: &str, var: &str) -> Self {
        Self {
            instance: instance.to_string(),
            var: var.to_string(),
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.var)
    }
}

impl FromStr for StateKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((i, v)) if !i.is_empty() && !v.is_empty() => Ok(StateKey::new(i, v)),
            _ => Err(alloc::format!("`{s}` is not of the form instance.var")),
        }
    }
}

impl TryFrom<String> for StateKey {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StateKey> for String {
    fn from(k: StateKey) -> String {
        k.to_string()
    }
}

/// Unordered socket pair, stored with the smaller reference first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[SocketRef; 2]", into = "[SocketRef; 2]")]
pub struct Connection {
    a: SocketRef,
    b: SocketRef,
}

impl Connection {
    pub fn new(a: SocketRef, b: SocketRef) -> Self {
        if a <= b {
            Self { a, b }
        } else {
            Self { a: b, b: a }
        }
    }

    pub fn ends(&self) -> (&SocketRef, &SocketRef) {
        (&self.a, &self.b)
    }

    fn touches(&self, s: &SocketRef) -> bool {
        &self.a == s || &self.b == s
    }
}

impl From<[SocketRef; 2]> for Connection {
    fn from([a, b]: [SocketRef; 2]) -> Self {
        Connection::new(a, b)
    }
}

impl From<Connection> for [SocketRef; 2] {
    fn from(c: Connection) -> Self {
        [c.a, c.b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionEvent {
    PressButton {
        instance: String,
        interaction: String,
    },
    SetDial {
        instance: String,
        interaction: String,
        value: f64,
    },
    ConnectCable {
        a: SocketRef,
        b: SocketRef,
    },
    DisconnectCable {
        a: SocketRef,
        b: SocketRef,
    },
    Place {
        instance: String,
        position: Vec3,
    },
}

/// An applied event with its arrival ordinal and the tick it was applied at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub ordinal: u64,
    pub tick: u64,
    pub event: InteractionEvent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("scenario failed validation:\n{0}")]
    InvalidScenario(ValidationReport),
    #[error("unknown reference `{0}`")]
    UnknownRef(String),
    #[error("`{reference}` is not a {expected}")]
    WrongInteraction {
        reference: String,
        expected: &'static str,
    },
    #[error("dial `{reference}` value {value} is outside [{min}, {max}]")]
    DialOutOfRange {
        reference: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("dial `{reference}` value {value} is not on the {step} step grid")]
    DialOffGrid {
        reference: String,
        value: f64,
        step: f64,
    },
    #[error("sockets `{a}` and `{b}` are not compatible")]
    IncompatibleSockets { a: SocketRef, b: SocketRef },
    #[error("socket `{0}` is already connected")]
    SocketOccupied(SocketRef),
    #[error("`{a}` and `{b}` are not connected")]
    NotConnected { a: SocketRef, b: SocketRef },
    #[error("instance `{0}` has no placement handle")]
    NotPlaceable(String),
    #[error("position for `{0}` is outside the environment bounds")]
    OutOfBounds(String),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error("binding wrote {value} to `{key}`, outside [{min}, {max}]")]
    OutOfRange {
        key: StateKey,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(
        "log record {index} goes backwards (ordinals must increase and ticks must not decrease)"
    )]
    NonMonotonicLog { index: usize },
}

impl RuntimeError {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            RuntimeError::InvalidScenario(_) => "InvalidScenario",
            RuntimeError::UnknownRef(_) => "UnknownRef",
            RuntimeError::WrongInteraction { .. } => "WrongInteraction",
            RuntimeError::DialOutOfRange { .. } => "DialOutOfRange",
            RuntimeError::DialOffGrid { .. } => "DialOffGrid",
            RuntimeError::IncompatibleSockets { .. } => "IncompatibleSockets",
            RuntimeError::SocketOccupied(_) => "SocketOccupied",
            RuntimeError::NotConnected { .. } => "NotConnected",
            RuntimeError::NotPlaceable(_) => "NotPlaceable",
            RuntimeError::OutOfBounds(_) => "OutOfBounds",
            RuntimeError::Binding(BindingError::DependencyCycle(_)) => "DependencyCycle",
            RuntimeError::Binding(_) => "EvaluationError",
            RuntimeError::OutOfRange { .. } => "OutOfRange",
            RuntimeError::Process(_) => "InconsistentStatus",
            RuntimeError::NonMonotonicLog { .. } => "NonMonotonicLog",
        }
    }
}

const DIAL_GRID_TOLERANCE: f64 = 1e-9;

/// The mutable part of the world that conditions look at.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct World {
    vars: BTreeMap<String, BTreeMap<String, Value>>,
    connections: BTreeSet<Connection>,
    transforms: BTreeMap<String, Transform>,
}

impl World {
    fn value(&self, key: &StateKey) -> Option<&Value> {
        self.vars.get(&key.instance).and_then(|m| m.get(&key.var))
    }

    fn set(&mut self, key: &StateKey, value: Value) {
        if let Some(slot) = self
            .vars
            .get_mut(&key.instance)
            .and_then(|m| m.get_mut(&key.var))
        {
            *slot = value;
        }
    }

    fn scalars(&self) -> BTreeMap<StateKey, f64> {
        self.vars
            .iter()
            .flat_map(|(i, m)| {
                m.iter()
                    .filter_map(move |(v, val)| val.as_scalar().map(|x| (StateKey::new(i, v), x)))
            })
            .collect()
    }
}

struct WorldRef<'a> {
    world: &'a World,
    scenario: &'a ScenarioDefinition,
}

impl WorldView for WorldRef<'_> {
    fn value(&self, instance: &str, var: &str) -> Option<&Value> {
        self.world.vars.get(instance).and_then(|m| m.get(var))
    }

    fn connected(&self, a: &SocketRef, b: &SocketRef) -> bool {
        self.world
            .connections
            .contains(&Connection::new(a.clone(), b.clone()))
    }

    fn position(&self, instance: &str) -> Option<Vec3> {
        self.world.transforms.get(instance).map(|t| t.position)
    }

    fn zone(&self, id: &str) -> Option<Aabb> {
        self.scenario.zone(id).copied()
    }
}

/// Result of a successfully applied event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub ordinal: u64,
    pub tick: u64,
    pub delta: StateDelta,
}

/// Live state of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    scenario: Arc<ScenarioDefinition>,
    world: World,
    statuses: BTreeMap<String, StatusMap>,
    tick_index: u64,
    clock: f64,
    cursors: BTreeMap<String, usize>,
    event_log: Vec<LoggedEvent>,
}

/// Loads a validated scenario: variables at their initial or overridden
/// values, process roots and their first steps active, tick 0.
pub fn load_session(
    scenario: impl Into<Arc<ScenarioDefinition>>,
) -> Result<SessionState, RuntimeError> {
    SessionState::load(scenario)
}

impl SessionState {
    pub fn load(scenario: impl Into<Arc<ScenarioDefinition>>) -> Result<Self, RuntimeError> {
        let scenario = scenario.into();
        let report = validate(&scenario);
        if report.has_errors() {
            return Err(RuntimeError::InvalidScenario(report));
        }

        let mut vars: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
        let mut transforms = BTreeMap::new();
        for inst in &scenario.instances {
            let class = scenario.class(&inst.class_id).expect("validated");
            let values = class
                .state_vars
                .iter()
                .map(|v| {
                    let value = inst
                        .state_overrides
                        .get(&v.name)
                        .unwrap_or(&v.initial)
                        .clone();
                    (v.name.clone(), value)
                })
                .collect();
            vars.insert(inst.id.clone(), values);
            transforms.insert(inst.id.clone(), inst.transform);
        }
        let world = World {
            vars,
            connections: BTreeSet::new(),
            transforms,
        };
        let cursors = scenario
            .tables
            .iter()
            .map(|t| (t.name.clone(), t.cursor(0, 0.0)))
            .collect();

        let start = SimTime {
            tick: 0,
            seconds: 0.0,
        };
        let view = WorldRef {
            world: &world,
            scenario: &scenario,
        };
        let mut statuses = BTreeMap::new();
        for p in &scenario.processes {
            statuses.insert(
                p.id.clone(),
                advance(&initial_statuses(p), p, &view, start)?,
            );
        }

        Ok(Self {
            scenario,
            world,
            statuses,
            tick_index: 0,
            clock: 0.0,
            cursors,
            event_log: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &ScenarioDefinition {
        &self.scenario
    }

    pub fn scenario_arc(&self) -> Arc<ScenarioDefinition> {
        Arc::clone(&self.scenario)
    }

    pub fn tick_index(&self) -> u64 {
        self.tick_index
    }

    /// Seconds since session start; always `tick_index * tick_seconds`.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn value(&self, instance: &str, var: &str) -> Option<&Value> {
        self.world.value(&StateKey::new(instance, var))
    }

    pub fn vars(&self) -> &BTreeMap<String, BTreeMap<String, Value>> {
        &self.world.vars
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.world.connections.iter()
    }

    pub fn is_connected(&self, a: &SocketRef, b: &SocketRef) -> bool {
        self.world
            .connections
            .contains(&Connection::new(a.clone(), b.clone()))
    }

    pub fn transform(&self, instance: &str) -> Option<&Transform> {
        self.world.transforms.get(instance)
    }

    pub fn cursors(&self) -> &BTreeMap<String, usize> {
        &self.cursors
    }

    pub fn statuses(&self) -> &BTreeMap<String, StatusMap> {
        &self.statuses
    }

    /// Status of `step` in whichever process declares it.
    pub fn step_status(&self, step: &str) -> Option<StepStatus> {
        self.statuses.values().find_map(|m| m.status(step))
    }

    pub fn event_log(&self) -> &[LoggedEvent] {
        &self.event_log
    }

    /// True once every process root is complete (and there is at least one
    /// process).
    pub fn is_complete(&self) -> bool {
        !self.scenario.processes.is_empty()
            && self.scenario.processes.iter().all(|p| {
                self.statuses.get(&p.id).and_then(|m| m.status(&p.root.id))
                    == Some(StepStatus::Complete)
            })
    }

    fn next_ordinal(&self) -> u64 {
        self.event_log.last().map_or(1, |e| e.ordinal + 1)
    }

    fn now(&self) -> SimTime {
        SimTime {
            tick: self.tick_index,
            seconds: self.clock,
        }
    }

    fn advance_all(
        &self,
        world: &World,
        now: SimTime,
    ) -> Result<BTreeMap<String, StatusMap>, RuntimeError> {
        let view = WorldRef {
            world,
            scenario: &self.scenario,
        };
        let mut out = BTreeMap::new();
        for p in &self.scenario.processes {
            let current = self
                .statuses
                .get(&p.id)
                .cloned()
                .unwrap_or_else(|| initial_statuses(p));
            out.insert(p.id.clone(), advance(&current, p, &view, now)?);
        }
        Ok(out)
    }

    /// Applies one interaction event, then advances the processes.
    pub fn apply_event(&mut self, event: InteractionEvent) -> Result<EventOutcome, RuntimeError> {
        let ordinal = self.next_ordinal();
        self.apply_event_with_ordinal(ordinal, event)
    }

    pub(crate) fn apply_event_with_ordinal(
        &mut self,
        ordinal: u64,
        event: InteractionEvent,
    ) -> Result<EventOutcome, RuntimeError> {
        let mut world = self.world.clone();
        self.mutate(&mut world, &event)?;
        let statuses = self.advance_all(&world, self.now())?;

        let delta = StateDelta::between(&self.world, &self.statuses, &world, &statuses);
        self.world = world;
        self.statuses = statuses;
        self.event_log.push(LoggedEvent {
            ordinal,
            tick: self.tick_index,
            event,
        });
        Ok(EventOutcome {
            ordinal,
            tick: self.tick_index,
            delta,
        })
    }

    fn mutate(&self, world: &mut World, event: &InteractionEvent) -> Result<(), RuntimeError> {
        match event {
            InteractionEvent::PressButton {
                instance,
                interaction,
            } => match self.interaction(instance, interaction)? {
                InteractionKind::Button {
                    target_var,
                    press_value,
                } => world.set(&StateKey::new(instance, target_var), press_value.clone()),
                _ => {
                    return Err(RuntimeError::WrongInteraction {
                        reference: alloc::format!("{instance}.{interaction}"),
                        expected: "button",
                    })
                }
            },
            InteractionEvent::SetDial {
                instance,
                interaction,
                value,
            } => {
                let reference = alloc::format!("{instance}.{interaction}");
                let InteractionKind::Dial {
                    target_var,
                    min,
                    max,
                    step,
                } = self.interaction(instance, interaction)?
                else {
                    return Err(RuntimeError::WrongInteraction {
                        reference,
                        expected: "dial",
                    });
                };
                if !(value.is_finite() && value >= min && value <= max) {
                    return Err(RuntimeError::DialOutOfRange {
                        reference,
                        value: *value,
                        min: *min,
                        max: *max,
                    });
                }
                let k = math::round((value - min) / step);
                if ((value - min) - k * step).abs() > DIAL_GRID_TOLERANCE {
                    return Err(RuntimeError::DialOffGrid {
                        reference,
                        value: *value,
                        step: *step,
                    });
                }
                let snapped = (min + k * step).clamp(*min, *max);
                world.set(&StateKey::new(instance, target_var), Value::Scalar(snapped));
            }
            InteractionEvent::ConnectCable { a, b } => {
                let tag_a = self.socket_tag(a)?;
                let tag_b = self.socket_tag(b)?;
                if a == b || tag_a != tag_b {
                    return Err(RuntimeError::IncompatibleSockets {
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
                for s in [a, b] {
                    if world.connections.iter().any(|c| c.touches(s)) {
                        return Err(RuntimeError::SocketOccupied(s.clone()));
                    }
                }
                world
                    .connections
                    .insert(Connection::new(a.clone(), b.clone()));
            }
            InteractionEvent::DisconnectCable { a, b } => {
                self.socket_tag(a)?;
                self.socket_tag(b)?;
                if !world
                    .connections
                    .remove(&Connection::new(a.clone(), b.clone()))
                {
                    return Err(RuntimeError::NotConnected {
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
            }
            InteractionEvent::Place { instance, position } => {
                let class = self
                    .scenario
                    .instance_class(instance)
                    .ok_or_else(|| RuntimeError::UnknownRef(instance.clone()))?;
                if !class
                    .interactions
                    .iter()
                    .any(|p| matches!(p.kind, InteractionKind::PlacementHandle))
                {
                    return Err(RuntimeError::NotPlaceable(instance.clone()));
                }
                if !self
                    .scenario
                    .environment
                    .bounds
                    .contains_point(*position, 0.0)
                {
                    return Err(RuntimeError::OutOfBounds(instance.clone()));
                }
                if let Some(t) = world.transforms.get_mut(instance) {
                    t.position = *position;
                }
            }
        }
        Ok(())
    }

    fn interaction(&self, instance: &str, id: &str) -> Result<&InteractionKind, RuntimeError> {
        self.scenario
            .instance_class(instance)
            .and_then(|c| c.interaction(id))
            .map(|p| &p.kind)
            .ok_or_else(|| RuntimeError::UnknownRef(alloc::format!("{instance}.{id}")))
    }

    fn socket_tag(&self, s: &SocketRef) -> Result<&str, RuntimeError> {
        match self.interaction(&s.instance, &s.socket)? {
            InteractionKind::CableSocket { compat_tag } => Ok(compat_tag),
            _ => Err(RuntimeError::WrongInteraction {
                reference: s.to_string(),
                expected: "cable socket",
            }),
        }
    }

    /// Advances one fixed step: clock and data cursors move, bindings are
    /// evaluated and written, timers and conditions are re-checked.
    pub fn tick(&mut self) -> Result<TelemetryFrame, RuntimeError> {
        let tick = self.tick_index + 1;
        let clock = tick as f64 * self.scenario.tick_seconds;
        let cursors: BTreeMap<String, usize> = self
            .scenario
            .tables
            .iter()
            .map(|t| (t.name.clone(), t.cursor(tick, clock)))
            .collect();

        let ctx = EvalContext {
            state: self.world.scalars(),
            tables: &self.scenario.tables,
            cursors: cursors.clone(),
            clock,
        };
        let out = apply_bindings(&self.scenario.bindings, &ctx)?;

        let mut world = self.world.clone();
        for (key, v) in &out.writes {
            let (min, max) = self
                .scenario
                .state_var(&key.instance, &key.var)
                .and_then(|sv| sv.kind.scalar_range())
                .ok_or_else(|| RuntimeError::UnknownRef(key.to_string()))?;
            if !(*v >= min && *v <= max) {
                return Err(RuntimeError::OutOfRange {
                    key: key.clone(),
                    value: *v,
                    min,
                    max,
                });
            }
            world.set(key, Value::Scalar(*v));
        }
        let statuses = self.advance_all(
            &world,
            SimTime {
                tick,
                seconds: clock,
            },
        )?;

        let delta = StateDelta::between(&self.world, &self.statuses, &world, &statuses);
        let completed_steps = delta
            .steps
            .values()
            .flat_map(|m| m.iter())
            .filter(|(_, s)| **s == StepStatus::Complete)
            .map(|(id, _)| id.clone())
            .collect();

        self.world = world;
        self.statuses = statuses;
        self.tick_index = tick;
        self.clock = clock;
        self.cursors = cursors;

        Ok(TelemetryFrame {
            tick_index: tick,
            clock,
            graph: out.graph,
            text: out.text,
            completed_steps,
            changed: delta.vars,
        })
    }

    /// SHA-256 over the canonical encoding of everything that defines the
    /// session: scenario content, world, step statuses, timeline, cursors
    /// and the event log.
    pub fn snapshot_hash(&self) -> SnapshotHash {
        #[derive(Serialize)]
        struct HashView<'a> {
            scenario: String,
            world: &'a World,
            statuses: &'a BTreeMap<String, StatusMap>,
            tick_index: u64,
            clock_bits: u64,
            cursors: &'a BTreeMap<String, usize>,
            event_log: &'a [LoggedEvent],
        }
        let view = HashView {
            scenario: content_digest(&self.scenario),
            world: &self.world,
            statuses: &self.statuses,
            tick_index: self.tick_index,
            clock_bits: self.clock.to_bits(),
            cursors: &self.cursors,
            event_log: &self.event_log,
        };
        let bytes = serde_json::to_vec(&view).expect("session state always encodes");
        SnapshotHash(Sha256::digest(&bytes).into())
    }

    /// Serializable copy for observers.
    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            scenario_id: self.scenario.id.clone(),
            tick_index: self.tick_index,
            clock: self.clock,
            vars: self.world.vars.clone(),
            connections: self.world.connections.iter().cloned().collect(),
            transforms: self.world.transforms.clone(),
            steps: self.statuses.clone(),
            cursors: self.cursors.clone(),
            event_count: self.event_log.len() as u64,
            completed: self.is_complete(),
            hash: self.snapshot_hash().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SnapshotHash(pub [u8; 32]);

impl fmt::Display for SnapshotHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for SnapshotHash {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut out)?;
        Ok(SnapshotHash(out))
    }
}

/// Full state as sent to viewers and returned by the state endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub scenario_id: String,
    pub tick_index: u64,
    pub clock: f64,
    pub vars: BTreeMap<String, BTreeMap<String, Value>>,
    pub connections: Vec<Connection>,
    pub transforms: BTreeMap<String, Transform>,
    pub steps: BTreeMap<String, StatusMap>,
    pub cursors: BTreeMap<String, usize>,
    pub event_count: u64,
    pub completed: bool,
    pub hash: String,
}
