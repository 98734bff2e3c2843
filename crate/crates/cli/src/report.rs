use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use polity_core::Error;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", describe(.0))]
    Core(#[from] Error),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything the user can fix.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

/// Renders a core error with 1-based person indices.
pub fn describe(e: &Error) -> String {
    match e {
        Error::Ragged { row, found, expected } => {
            format!("ragged input: row {} has {found} entries, expected {expected}", row + 1)
        }
        Error::NonFinite { row, col } => format!("non-finite entry at row {}, column {}", row + 1, col + 1),
        Error::NegativeEntry { row, col, value } => {
            format!("negative entry {value} at row {}, column {}", row + 1, col + 1)
        }
        Error::NonPositiveEntry { row, col, value } => format!(
            "entry {value} at row {}, column {} must be strictly positive",
            row + 1,
            col + 1
        ),
        Error::RowSumViolation { row, deviation } => {
            format!("row {} does not sum to 1 (off by {deviation:e})", row + 1)
        }
        Error::IndexOutOfRange { index, n } => format!("person {} does not exist (n = {n})", index + 1),
        Error::Overlap { index } => format!("person {} is both voter and candidate", index + 1),
        Error::CyclicSpec { node } => format!("parent links from person {} never reach the root", node + 1),
        Error::WalkLimitExceeded { start, limit } => {
            format!("random walk from person {} exceeded {limit} steps", start + 1)
        }
        other => other.to_string(),
    }
}

pub struct InputFile {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl InputFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        Ok(InputFile { path: path.to_path_buf(), bytes })
    }

    pub fn text(&self) -> Result<&str, CliError> {
        std::str::from_utf8(&self.bytes)
            .map_err(|_| CliError::Invalid(format!("{} is not UTF-8 text", self.path.display())))
    }

    pub fn digest(&self) -> InputDigest {
        let hash = Sha256::digest(&self.bytes);
        InputDigest {
            path: self.path.display().to_string(),
            sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What a command produced, before it is wrapped in a report.
pub struct Outcome {
    pub inputs: Vec<InputDigest>,
    pub parameters: Value,
    pub results: Value,
    pub diagnostics: Vec<String>,
    pub summary: String,
}

#[derive(Serialize)]
pub struct Report {
    version: &'static str,
    command: &'static str,
    inputs: Vec<InputDigest>,
    parameters: Value,
    results: Value,
    diagnostics: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, o: Outcome) -> Self {
        Report {
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: o.inputs,
            parameters: o.parameters,
            results: o.results,
            diagnostics: o.diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
        }
    }
}
