//! Assembles a scenario directory into one scenario file.
//!
//! The directory holds exactly one `*.twin.json` base scenario. Every
//! `*.csv` becomes a data table named after the file stem, every
//! `*.proc.txt` a process model. Mesh references must point at readable
//! STL/OBJ files; they are copied next to the output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use twin_core::data::{import_table, select_columns, DataError};
use twin_core::process::{parse_form, FormError};
use twin_core::{validate, ScenarioDefinition, ValidationReport};

use crate::files::{io_error, read_scenario, write_atomic, FileError};
use crate::mesh_io::{read_mesh, MeshIoError};

#[derive(Debug, Error)]
pub enum PackError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error("expected exactly one *.twin.json in {dir}, found {found}")]
    BaseScenario { dir: PathBuf, found: usize },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: DataError },
    #[error("{path}:{}: {}", source.line, source.message)]
    Form { path: PathBuf, source: FormError },
    #[error("asset `{asset}`: {source}")]
    Asset { asset: String, source: MeshIoError },
    #[error("assembled scenario is invalid:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Default)]
pub struct PackOptions {
    /// Table name to the columns to keep.
    pub columns: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Packed {
    pub scenario: ScenarioDefinition,
    /// Mesh references, relative to the source directory.
    pub assets: Vec<String>,
}

pub fn assemble(dir: &Path, opts: &PackOptions) -> Result<Packed, PackError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let name_of = |p: &Path| {
        p.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .to_string()
    };

    let bases: Vec<&PathBuf> = entries
        .iter()
        .filter(|p| name_of(p).ends_with(".twin.json"))
        .collect();
    let [base] = bases[..] else {
        return Err(PackError::BaseScenario {
            dir: dir.to_path_buf(),
            found: bases.len(),
        });
    };
    let mut s = read_scenario(base)?;

    for path in &entries {
        let name = name_of(path);
        if let Some(stem) = name.strip_suffix(".csv") {
            let bytes = fs::read(path).map_err(io_error(path))?;
            let table_err = |source| PackError::Table {
                path: path.clone(),
                source,
            };
            let mut table = import_table(stem, &bytes).map_err(table_err)?;
            if let Some(cols) = opts.columns.get(stem) {
                let names: Vec<&str> = cols.iter().map(String::as_str).collect();
                let sel = select_columns(&table, &names).map_err(table_err)?;
                table = table.project(&sel).map_err(table_err)?;
            }
            match s.tables.iter_mut().find(|t| t.name == table.name) {
                Some(slot) => *slot = table,
                None => s.tables.push(table),
            }
        } else if name.ends_with(".proc.txt") {
            let text = fs::read_to_string(path).map_err(io_error(path))?;
            let model = parse_form(&text).map_err(|source| PackError::Form {
                path: path.clone(),
                source,
            })?;
            match s.processes.iter_mut().find(|p| p.id == model.id) {
                Some(slot) => *slot = model,
                None => s.processes.push(model),
            }
        }
    }

    let report = validate(&s);
    if report.has_errors() {
        return Err(PackError::Invalid(report));
    }

    let mut assets: Vec<String> = s
        .environment
        .mesh_ref
        .iter()
        .chain(s.classes.iter().map(|c| &c.mesh_ref))
        .filter(|r| !r.is_empty())
        .cloned()
        .collect();
    assets.sort();
    assets.dedup();
    for asset in &assets {
        read_mesh(&dir.join(asset)).map_err(|source| PackError::Asset {
            asset: asset.clone(),
            source,
        })?;
    }
    Ok(Packed {
        scenario: s,
        assets,
    })
}

/// Assembles `dir` and writes the scenario to `out`, copying meshes to the
/// same relative paths beside it.
pub fn pack(dir: &Path, out: &Path, opts: &PackOptions) -> Result<Packed, PackError> {
    let packed = assemble(dir, opts)?;
    let bytes = twin_core::save(&packed.scenario).map_err(|e| match e {
        twin_core::scenario::SaveError::Invalid(r) => PackError::Invalid(r),
        other => PackError::File(FileError::Save {
            path: out.to_path_buf(),
            source: other,
        }),
    })?;
    let out_dir = out.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    write_atomic(out, &bytes)?;
    for asset in &packed.assets {
        let from = dir.join(asset);
        let to = out_dir.join(asset);
        if fs::canonicalize(&from).ok() == fs::canonicalize(&to).ok() {
            continue;
        }
        if let Some(parent) = to.parent() {
            fs::create_dir_all(parent).map_err(io_error(parent))?;
        }
        fs::copy(&from, &to).map_err(io_error(&to))?;
    }
    Ok(packed)
}
