//! Scenario files on disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;
use twin_core::scenario::{BuildError, LoadError, SaveError};
use twin_core::ScenarioDefinition;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: LoadError },
    #[error("{path}: {source}")]
    Save { path: PathBuf, source: SaveError },
}

pub fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A new empty scenario with a random id.
pub fn new_scenario(name: &str) -> Result<ScenarioDefinition, BuildError> {
    ScenarioDefinition::new(name, uuid::Uuid::new_v4().to_string())
}

pub fn read_scenario(path: &Path) -> Result<ScenarioDefinition, FileError> {
    let bytes = fs::read(path).map_err(io_error(path))?;
    twin_core::load(&bytes).map_err(|source| FileError::Load {
        path: path.to_path_buf(),
        source,
    })
}

/// Validates, encodes and writes atomically (temp file + rename).
pub fn write_scenario(path: &Path, s: &ScenarioDefinition) -> Result<(), FileError> {
    let bytes = twin_core::save(s).map_err(|source| FileError::Save {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_error(&tmp))?;
    f.write_all(bytes).map_err(io_error(&tmp))?;
    f.sync_all().map_err(io_error(&tmp))?;
    fs::rename(&tmp, path).map_err(io_error(path))
}

/// Resolves an asset reference against the directory holding the scenario.
pub fn resolve_asset(scenario_path: &Path, asset: &str) -> PathBuf {
    scenario_path.parent().unwrap_or(Path::new(".")).join(asset)
}
