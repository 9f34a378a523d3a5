//! Canonical JSON encoding.
//!
//! Struct fields are written in declaration order, maps in key order and
//! numbers in shortest round-trip form, so equal scenarios always encode to
//! identical bytes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::{validate, ScenarioDefinition, FORMAT_VERSION};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SaveError {
    #[error("scenario has validation errors:\n{0}")]
    Invalid(ValidationReport),
    #[error("encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("malformed scenario document: {0}")]
    MalformedDocument(String),
    #[error("unsupported format version {found} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
}

/// Encodes a scenario. Refuses scenarios with validation errors; warnings
/// are allowed.
pub fn save(s: &ScenarioDefinition) -> Result<Vec<u8>, SaveError> {
    let report = validate(s);
    if report.has_errors() {
        return Err(SaveError::Invalid(report));
    }
    encode(s).map_err(SaveError::Encode)
}

pub(crate) fn encode(s: &ScenarioDefinition) -> Result<Vec<u8>, String> {
    let mut out = serde_json::to_vec_pretty(s).map_err(|e| e.to_string())?;
    out.push(b'\n');
    Ok(out)
}

pub fn load(bytes: &[u8]) -> Result<ScenarioDefinition, LoadError> {
    let doc: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| LoadError::MalformedDocument(e.to_string()))?;
    let version = doc
        .get("format_version")
        .ok_or_else(|| LoadError::MalformedDocument(String::from("missing `format_version`")))?;
    let version = version.as_u64().ok_or_else(|| {
        LoadError::MalformedDocument(String::from("`format_version` is not an integer"))
    })?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(LoadError::UnsupportedVersion { found: version });
    }
    serde_json::from_value(doc).map_err(|e| LoadError::MalformedDocument(e.to_string()))
}

/// Hex SHA-256 of the canonical encoding. Scenarios with equal content get
/// equal digests.
pub fn content_digest(s: &ScenarioDefinition) -> String {
    use sha2::{Digest, Sha256};
    let bytes = encode(s).expect("scenario always encodes");
    hex::encode(Sha256::digest(&bytes))
}
