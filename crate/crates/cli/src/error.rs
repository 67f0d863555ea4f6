//! Command errors and their exit codes.

use std::fmt::Display;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Validation error for a named configuration field.
    pub fn field(name: &str, why: impl Display) -> CliError {
        CliError::Validation(format!("{name}: {why}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Io(_) => 3,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "invalid configuration",
            CliError::Verification(_) => "verification failed",
            CliError::Io(_) => "i/o error",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
