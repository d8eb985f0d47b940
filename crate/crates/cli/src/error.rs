use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures that abort a command, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[source] halfspace_core::Error),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for solver failures, 3 for configuration and file problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
        }
    }
}

impl From<halfspace_core::Error> for CliError {
    fn from(e: halfspace_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_SOLVER: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

pub type Result<T> = std::result::Result<T, CliError>;
