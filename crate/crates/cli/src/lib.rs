//! File formats and error plumbing for the `swd` binary.

pub mod input;
pub mod report;

use std::fmt;

/// Failure of a command, carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad parameter values or unreadable input files (exit 2).
    Usage(String),
    /// Numerical failure or output error (exit 4).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<swd_core::Error> for CliError {
    fn from(e: swd_core::Error) -> Self {
        use swd_core::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::InvalidMeasure(_)
            | E::UnsupportedDimension(_)
            | E::InvalidWitness(_)
            | E::BudgetExceeded(_) => Self::Usage(e.to_string()),
            E::NumericalDegeneracy(_) | E::Construction(_) => Self::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
