//! The serialized twin: environment, equipment classes and instances, data
//! tables, bindings and process models.
//!
//! Coordinates are right-handed, Y-up, in meters. Rotations are Euler XYZ
//! angles in degrees, applied X then Y then Z.

mod builder;
mod codec;
mod validate;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Binding, DataTable};
use crate::process::ProcessModel;

pub use builder::BuildError;
pub use codec::{content_digest, load, save, LoadError, SaveError};
pub use validate::validate;

/// Version written to `format_version`; `load` rejects anything else.
pub const FORMAT_VERSION: u32 = 1;

pub const DEFAULT_TICK_SECONDS: f64 = 0.1;

/// Default activation tolerance for interaction points, in meters.
pub const DEFAULT_INTERACTION_RADIUS: f64 = 0.05;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDefinition {
    pub format_version: u32,
    pub id: String,
    pub name: String,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub classes: Vec<EquipmentClass>,
    #[serde(default)]
    pub instances: Vec<EquipmentInstance>,
    #[serde(default)]
    pub tables: Vec<DataTable>,
    #[serde(default)]
    pub bindings: Vec<Binding>,
    #[serde(default)]
    pub processes: Vec<ProcessModel>,
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: f64,
}

fn default_tick_seconds() -> f64 {
    DEFAULT_TICK_SECONDS
}

impl ScenarioDefinition {
    pub fn class(&self, id: &str) -> Option<&EquipmentClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn instance(&self, id: &str) -> Option<&EquipmentInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Class of the given instance.
    pub fn instance_class(&self, instance_id: &str) -> Option<&EquipmentClass> {
        self.instance(instance_id)
            .and_then(|i| self.class(&i.class_id))
    }

    pub fn table(&self, name: &str) -> Option<&DataTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Declared variable `var` on the class of `instance`.
    pub fn state_var(&self, instance: &str, var: &str) -> Option<&StateVariable> {
        self.instance_class(instance).and_then(|c| c.state_var(var))
    }

    pub fn zone(&self, id: &str) -> Option<&Aabb> {
        self.environment.named_zones.get(id)
    }
}

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_finite(&self) -> bool {
        self.min
            .iter()
            .chain(self.max.iter())
            .all(|v| v.is_finite())
    }

    pub fn has_positive_extent(&self) -> bool {
        (0..3).all(|i| self.max[i] > self.min[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    /// Closed containment after growing the box by `margin` on every side.
    pub fn contains_point(&self, p: Vec3, margin: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - margin && p[i] <= self.max[i] + margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_ref: Option<String>,
    pub bounds: Aabb,
    #[serde(default)]
    pub named_zones: BTreeMap<String, Aabb>,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            name: String::from("workbench"),
            mesh_ref: None,
            bounds: Aabb::new([-5.0, 0.0, -5.0], [5.0, 3.0, 5.0]),
            named_zones: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentClass {
    pub id: String,
    pub display_name: String,
    pub mesh_ref: String,
    #[serde(default)]
    pub state_vars: Vec<StateVariable>,
    #[serde(default)]
    pub interactions: Vec<InteractionPoint>,
}

impl EquipmentClass {
    pub fn new(
        id: impl Into<String>,
        display_name: impl Into<String>,
        mesh_ref: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            display_name: display_name.into(),
            mesh_ref: mesh_ref.into(),
            state_vars: Vec::new(),
            interactions: Vec::new(),
        }
    }

    pub fn with_var(mut self, var: StateVariable) -> Self {
        self.state_vars.push(var);
        self
    }

    pub fn with_interaction(mut self, p: InteractionPoint) -> Self {
        self.interactions.push(p);
        self
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVariable> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn interaction(&self, id: &str) -> Option<&InteractionPoint> {
        self.interactions.iter().find(|p| p.id == id)
    }
}

/// A state value. Booleans and enum labels are compared exactly; scalars are
/// plain doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Scalar(f64),
    Enum(String),
}

impl Value {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    /// Parses the textual forms used by forms and the CLI: `true`/`false`,
    /// decimal numbers, optionally quoted labels.
    pub fn parse_literal(text: &str) -> Option<Value> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        if let Some(inner) = text.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
            return Some(Value::Enum(String::from(inner)));
        }
        match text {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Ok(v) = text.parse::<f64>() {
            return v.is_finite().then_some(Value::Scalar(v));
        }
        Some(Value::Enum(String::from(text)))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Scalar(v) => write!(f, "{v}"),
            Value::Enum(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VarKind {
    Boolean,
    Enum { values: Vec<String> },
    Scalar { unit: String, min: f64, max: f64 },
}

impl VarKind {
    pub fn accepts(&self, value: &Value) -> bool {
        match (self, value) {
            (VarKind::Boolean, Value::Bool(_)) => true,
            (VarKind::Enum { values }, Value::Enum(v)) => values.iter().any(|x| x == v),
            (VarKind::Scalar { min, max, .. }, Value::Scalar(v)) => {
                v.is_finite() && *v >= *min && *v <= *max
            }
            _ => false,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, VarKind::Scalar { .. })
    }

    pub fn scalar_range(&self) -> Option<(f64, f64)> {
        match self {
            VarKind::Scalar { min, max, .. } => Some((*min, *max)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VarKind::Boolean => "boolean",
            VarKind::Enum { .. } => "enum",
            VarKind::Scalar { .. } => "scalar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVariable {
    pub name: String,
    pub kind: VarKind,
    pub initial: Value,
}

impl StateVariable {
    pub fn boolean(name: impl Into<String>, initial: bool) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Boolean,
            initial: Value::Bool(initial),
        }
    }

    pub fn enumeration(name: impl Into<String>, values: &[&str], initial: &str) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Enum {
                values: values.iter().map(|v| String::from(*v)).collect(),
            },
            initial: Value::Enum(String::from(initial)),
        }
    }

    pub fn scalar(
        name: impl Into<String>,
        unit: impl Into<String>,
        min: f64,
        max: f64,
        initial: f64,
    ) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Scalar {
                unit: unit.into(),
                min,
                max,
            },
            initial: Value::Scalar(initial),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionKind {
    Button {
        target_var: String,
        press_value: Value,
    },
    Dial {
        target_var: String,
        min: f64,
        max: f64,
        step: f64,
    },
    CableSocket {
        compat_tag: String,
    },
    PlacementHandle,
}

impl InteractionKind {
    pub fn name(&self) -> &'static str {
        match self {
            InteractionKind::Button { .. } => "button",
            InteractionKind::Dial { .. } => "dial",
            InteractionKind::CableSocket { .. } => "cable_socket",
            InteractionKind::PlacementHandle => "placement_handle",
        }
    }
}

/// A located affordance on a piece of equipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPoint {
    pub id: String,
    pub kind: InteractionKind,
    pub local_position: Vec3,
    /// Unit vector the affordance points along.
    pub local_direction: Vec3,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    DEFAULT_INTERACTION_RADIUS
}

impl InteractionPoint {
    /// Point at the class origin pointing up with the default radius.
    pub fn new(id: impl Into<String>, kind: InteractionKind) -> Self {
        Self {
            id: id.into(),
            kind,
            local_position: [0.0; 3],
            local_direction: [0.0, 1.0, 0.0],
            radius: DEFAULT_INTERACTION_RADIUS,
        }
    }

    pub fn at(mut self, position: Vec3, direction: Vec3) -> Self {
        self.local_position = position;
        self.local_direction = direction;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub position: Vec3,
    /// Euler XYZ, degrees.
    #[serde(default)]
    pub rotation: Vec3,
    #[serde(default = "unit_scale")]
    pub scale: Vec3,
}

fn unit_scale() -> Vec3 {
    [1.0; 3]
}

impl Default for Transform {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            rotation: [0.0; 3],
            scale: unit_scale(),
        }
    }
}

impl Transform {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentInstance {
    pub id: String,
    pub class_id: String,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub state_overrides: BTreeMap<String, Value>,
}
