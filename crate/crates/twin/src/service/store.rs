//! On-disk layout under the data directory:
//!
//! ```text
//! scenarios/<scenario_id>.twin.json
//! sessions/<session_id>/meta.json
//! sessions/<session_id>/log.jsonl
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use twin_core::scenario::{content_digest, LoadError};
use twin_core::ScenarioDefinition;

use super::error::ApiError;
use super::protocol::SessionRecord;
use crate::files::write_atomic;

pub struct Store {
    root: PathBuf,
    scenarios: RwLock<HashMap<String, Arc<ScenarioDefinition>>>,
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

impl Store {
    pub fn open(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root.join("scenarios"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self {
            root: root.to_path_buf(),
            scenarios: RwLock::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.root.join("scenarios").join(format!("{id}.twin.json"))
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Validates and stores a scenario under the digest of its canonical
    /// encoding.
    pub fn put_scenario(&self, bytes: &[u8]) -> Result<String, ApiError> {
        let s = twin_core::load(bytes).map_err(|e| match e {
            LoadError::MalformedDocument(m) => ApiError::Malformed(m),
            other => ApiError::Malformed(other.to_string()),
        })?;
        let report = twin_core::validate(&s);
        if report.has_errors() {
            return Err(ApiError::Invalid(report));
        }
        let id = content_digest(&s);
        let path = self.scenario_path(&id);
        if !path.exists() {
            let canonical = twin_core::save(&s).map_err(internal)?;
            write_atomic(&path, &canonical).map_err(internal)?;
        }
        self.scenarios
            .write()
            .expect("lock")
            .insert(id.clone(), Arc::new(s));
        Ok(id)
    }

    pub fn scenario(&self, id: &str) -> Result<Arc<ScenarioDefinition>, ApiError> {
        if let Some(s) = self.scenarios.read().expect("lock").get(id) {
            return Ok(Arc::clone(s));
        }
        let valid_id = !id.is_empty() && id.bytes().all(|b| b.is_ascii_hexdigit());
        let path = self.scenario_path(id);
        if !valid_id || !path.exists() {
            return Err(ApiError::UnknownScenario(id.to_string()));
        }
        let bytes = fs::read(&path).map_err(internal)?;
        let s = Arc::new(twin_core::load(&bytes).map_err(internal)?);
        self.scenarios
            .write()
            .expect("lock")
            .insert(id.to_string(), Arc::clone(&s));
        Ok(s)
    }

    pub fn scenario_bytes(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        self.scenario(id)?;
        fs::read(self.scenario_path(id)).map_err(internal)
    }

    pub fn write_record(&self, r: &SessionRecord) -> Result<(), ApiError> {
        let dir = self.session_dir(&r.session_id);
        fs::create_dir_all(&dir).map_err(internal)?;
        let mut bytes = serde_json::to_vec_pretty(r).map_err(internal)?;
        bytes.push(b'\n');
        write_atomic(&dir.join("meta.json"), &bytes).map_err(internal)
    }

    pub fn records(&self) -> Vec<Result<SessionRecord, String>> {
        let Ok(entries) = fs::read_dir(self.root.join("sessions")) else {
            return Vec::new();
        };
        let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        dirs.sort();
        dirs.into_iter()
            .filter(|d| d.is_dir())
            .map(|d| {
                let meta = d.join("meta.json");
                let bytes = fs::read(&meta).map_err(|e| format!("{}: {e}", meta.display()))?;
                serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", meta.display()))
            })
            .collect()
    }
}
