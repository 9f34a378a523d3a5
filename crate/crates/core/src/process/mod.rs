//! Procedures, instructions and the conditions that gate them.

mod engine;
mod form;
mod validate;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scenario::Value;

pub use engine::{
    advance, evaluate_condition, initial_statuses, ProcessError, SimTime, StatusMap, StepRecord,
    StepStatus, WorldView,
};
pub use form::{parse_form, to_form, FormError};
pub use validate::validate_process;

/// `instance.socket`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SocketRef {
    pub instance: String,
    pub socket: String,
}

impl SocketRef {
    pub fn new(instance: impl Into<String>, socket: impl Into<String>) -> Self {
        Self {
            instance: instance.into(),
            socket: socket.into(),
        }
    }
}

impl fmt::Display for SocketRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.socket)
    }
}

impl FromStr for SocketRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((i, k)) if !i.is_empty() && !k.is_empty() && !k.contains('.') => {
                Ok(SocketRef::new(i, k))
            }
            _ => Err(alloc::format!("`{s}` is not of the form instance.socket")),
        }
    }
}

impl TryFrom<String> for SocketRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SocketRef> for String {
    fn from(r: SocketRef) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub id: String,
    pub root: Procedure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub id: String,
    pub title: String,
    /// Ordered procedures run their steps as a chain, each one linking to the
    /// next; unordered ones accept them in any order.
    pub ordered: bool,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Step {
    Procedure(Procedure),
    Instruction(Instruction),
}

impl Step {
    pub fn id(&self) -> &str {
        match self {
            Step::Procedure(p) => &p.id,
            Step::Instruction(i) => &i.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub equipment_refs: Vec<String>,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    StateEquals {
        instance: String,
        var: String,
        value: Value,
    },
    StateInRange {
        instance: String,
        var: String,
        lo: f64,
        hi: f64,
    },
    Connected {
        a: SocketRef,
        b: SocketRef,
    },
    Placed {
        instance: String,
        zone: String,
        tolerance: f64,
    },
    Wait {
        seconds: f64,
    },
    All {
        conditions: Vec<Condition>,
    },
    Any {
        conditions: Vec<Condition>,
    },
}

impl ProcessModel {
    /// Model whose id is the root procedure's id.
    pub fn new(root: Procedure) -> Self {
        Self {
            id: root.id.clone(),
            root,
        }
    }

    /// Every step in depth-first pre-order, root first.
    pub fn steps(&self) -> Vec<StepRef<'_>> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a Procedure, out: &mut Vec<StepRef<'a>>) {
            out.push(StepRef::Procedure(p));
            for s in &p.steps {
                match s {
                    Step::Procedure(c) => walk(c, out),
                    Step::Instruction(i) => out.push(StepRef::Instruction(i)),
                }
            }
        }
        walk(&self.root, &mut out);
        out
    }

    /// Depth of the procedure tree; a root holding only instructions has
    /// depth 1.
    pub fn depth(&self) -> usize {
        fn depth(p: &Procedure) -> usize {
            1 + p
                .steps
                .iter()
                .map(|s| match s {
                    Step::Procedure(c) => depth(c),
                    Step::Instruction(_) => 0,
                })
                .max()
                .unwrap_or(0)
        }
        depth(&self.root)
    }

    pub fn find(&self, id: &str) -> Option<StepRef<'_>> {
        self.steps().into_iter().find(|s| s.id() == id)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum StepRef<'a> {
    Procedure(&'a Procedure),
    Instruction(&'a Instruction),
}

impl<'a> StepRef<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            StepRef::Procedure(p) => &p.id,
            StepRef::Instruction(i) => &i.id,
        }
    }
}
