use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] twolevel_core::Error),
    #[error("statistical gate failed: {0}")]
    Gate(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) | CliError::Core(_) => ExitCode::from(2),
            CliError::Gate(_) => ExitCode::from(3),
            CliError::Io { .. } => ExitCode::from(1),
        }
    }
}
