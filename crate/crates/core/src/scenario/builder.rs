//! Authoring operations. Each one either applies completely or leaves the
//! scenario untouched.

use alloc::string::String;

use thiserror::Error;

use super::validate::{check_class, check_interaction, check_transform};
use super::{
    EnvironmentSpec, EquipmentClass, EquipmentInstance, InteractionPoint, ScenarioDefinition,
    Transform, DEFAULT_TICK_SECONDS, FORMAT_VERSION,
};
use crate::report::IssueCode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("scenario name is empty")]
    EmptyName,
    #[error("{collection} id `{id}` is already in use")]
    DuplicateId {
        collection: &'static str,
        id: String,
    },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("invalid interaction at {path}: {message}")]
    InvalidInteraction { path: String, message: String },
    #[error("invalid class at {path}: {message}")]
    InvalidClass { path: String, message: String },
    #[error("bad transform: {0}")]
    BadTransform(String),
}

impl ScenarioDefinition {
    /// Empty scenario with the given id. Use `twin::new_scenario` for a
    /// freshly generated id.
    pub fn new(name: impl Into<String>, id: impl Into<String>) -> Result<Self, BuildError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(BuildError::EmptyName);
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            id: id.into(),
            name,
            environment: EnvironmentSpec::default(),
            classes: alloc::vec::Vec::new(),
            instances: alloc::vec::Vec::new(),
            tables: alloc::vec::Vec::new(),
            bindings: alloc::vec::Vec::new(),
            processes: alloc::vec::Vec::new(),
            tick_seconds: DEFAULT_TICK_SECONDS,
        })
    }

    pub fn register_class(&mut self, class: EquipmentClass) -> Result<(), BuildError> {
        if self.class(&class.id).is_some() {
            return Err(BuildError::DuplicateId {
                collection: "classes",
                id: class.id,
            });
        }
        if let Some(issue) = check_class(&class).into_iter().next() {
            return Err(match issue.code {
                IssueCode::InvalidInteraction => BuildError::InvalidInteraction {
                    path: issue.path,
                    message: issue.message,
                },
                _ => BuildError::InvalidClass {
                    path: issue.path,
                    message: issue.message,
                },
            });
        }
        self.classes.push(class);
        Ok(())
    }

    pub fn instantiate(
        &mut self,
        class_id: &str,
        instance_id: impl Into<String>,
        transform: Transform,
    ) -> Result<(), BuildError> {
        let instance_id = instance_id.into();
        if self.class(class_id).is_none() {
            return Err(BuildError::UnknownClass(String::from(class_id)));
        }
        if self.instance(&instance_id).is_some() {
            return Err(BuildError::DuplicateId {
                collection: "instances",
                id: instance_id,
            });
        }
        if let Some(issue) =
            check_transform(&alloc::format!("instances[{instance_id}]"), &transform)
        {
            return Err(BuildError::BadTransform(issue.message));
        }
        self.instances.push(EquipmentInstance {
            id: instance_id,
            class_id: String::from(class_id),
            transform,
            state_overrides: Default::default(),
        });
        Ok(())
    }

    /// Appends an interaction to a class; every instance of the class gains
    /// it.
    pub fn add_interaction(
        &mut self,
        class_id: &str,
        point: InteractionPoint,
    ) -> Result<(), BuildError> {
        let class = self
            .classes
            .iter_mut()
            .find(|c| c.id == class_id)
            .ok_or_else(|| BuildError::UnknownClass(String::from(class_id)))?;
        if class.interaction(&point.id).is_some() {
            return Err(BuildError::DuplicateId {
                collection: "interactions",
                id: point.id,
            });
        }
        if let Some(issue) = check_interaction(class, &point).into_iter().next() {
            return Err(BuildError::InvalidInteraction {
                path: issue.path,
                message: issue.message,
            });
        }
        class.interactions.push(point);
        Ok(())
    }
}
