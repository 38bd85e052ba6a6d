use alloc::string::String;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(usize),
    #[error("invalid witness function: {0}")]
    InvalidWitness(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    /// A bracket cover failed to contain a valid function. Indicates a bug.
    #[error("bracket construction bug: {0}")]
    Construction(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
