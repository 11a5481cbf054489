//! Batch runner around `prosumer-core`: scenario files, reports and the
//! `prosumer` command line.

pub mod commands;
pub mod report;
pub mod scenario_file;
pub mod series_file;

use prosumer_core::simulation::SimError;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad input: malformed files, inconsistent scenarios, bad flags.
    Validation(String),
    /// A solver failed on valid input.
    Numerical(String),
    /// Output could not be written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}
