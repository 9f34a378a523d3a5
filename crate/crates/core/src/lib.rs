//! Core model and engines for laboratory digital twins.
//!
//! Everything in this crate is pure computation over values: scenario
//! authoring and validation, the binding expression language, the
//! procedure/condition engine, the deterministic session runtime and the
//! geometry conversion loop. File IO, the command line and the network
//! service live in the `twin` crate.
//!
//! The crate builds without `std` (with `alloc`) when the default `std`
//! feature is disabled.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod geometry;
mod math;
pub mod process;
pub mod report;
pub mod runtime;
pub mod scenario;

pub use report::{Issue, IssueCode, Severity, ValidationReport};
pub use scenario::{load, save, validate, ScenarioDefinition, FORMAT_VERSION};
