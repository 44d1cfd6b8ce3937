use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs contained NaN/infinite values or had inconsistent shapes.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// An argument violated a documented contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A linear-algebra operation failed even after jitter escalation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An operation was called on an object in the wrong lifecycle state.
    #[error("lifecycle: {0}")]
    Lifecycle(String),

    /// A precondition on the optimizer state was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The requested operation is outside the supported range.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A problem evaluation failed.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("record format: {0}")]
    RecordFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
