use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the command-line tool, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an invalid configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Malformed, empty or missing input data (exit 2).
    #[error("{0}")]
    Data(String),
    /// A stage failed while running (exit 3).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> CliError {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }

    /// An artifact that an earlier subcommand should have written is absent.
    pub fn missing_artifact(path: &Path, producer: &str) -> CliError {
        CliError::Data(format!(
            "missing {}; run `cliffbench {producer}` first",
            path.display()
        ))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Path of an artifact required by a stage; errors name the producing stage.
pub fn require(path: PathBuf, producer: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::missing_artifact(&path, producer))
    }
}
