use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the runner, each with a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn validation(msg: impl std::fmt::Display) -> Self {
        CliError::Validation(msg.to_string())
    }
}

impl From<simsr_core::Error> for CliError {
    fn from(e: simsr_core::Error) -> Self {
        match e {
            simsr_core::Error::NotConverged { iterations, residual } => CliError::Convergence { iterations, residual },
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
