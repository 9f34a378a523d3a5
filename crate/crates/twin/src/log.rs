//! Append-only session logs in JSON Lines.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use twin_core::runtime::LogRecord;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub fn encode_record(r: &LogRecord) -> String {
    let mut line = serde_json::to_string(r).expect("log records always encode");
    line.push('\n');
    line
}

/// Parses JSON Lines. A final line without a newline is a torn write and
/// is dropped; any other bad line is corruption.
pub fn parse_log(text: &str) -> Result<(Vec<LogRecord>, usize), (usize, String)> {
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in text[..complete].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok((out, complete))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let text = fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text)
        .map(|(records, _)| records)
        .map_err(|(line, message)| LogError::Corrupt {
            path: path.to_path_buf(),
            line,
            message,
        })
}

pub struct LogWriter {
    path: PathBuf,
    file: File,
}

impl LogWriter {
    /// Opens for appending, first cutting off a torn final line so new
    /// records start on a fresh line.
    pub fn open(path: &Path) -> Result<(Self, Vec<LogRecord>), LogError> {
        let io_err = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(e)),
        };
        let (records, complete) =
            parse_log(&text).map_err(|(line, message)| LogError::Corrupt {
                path: path.to_path_buf(),
                line,
                message,
            })?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        if complete < text.len() {
            file.set_len(complete as u64).map_err(io_err)?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    /// Writes one record in a single `write` call; `durable` also waits for
    /// the disk.
    pub fn append(&mut self, r: &LogRecord, durable: bool) -> Result<(), LogError> {
        let io_err = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        self.file
            .write_all(encode_record(r).as_bytes())
            .map_err(io_err)?;
        if durable {
            self.file.sync_data().map_err(io_err)?;
        }
        Ok(())
    }
}
