use thiserror::Error;

/// Errors raised by the approximation pipeline.
#[derive(Debug, Error)]
pub enum LelaError {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input is well-formed but numerically degenerate (zero matrix,
    /// rank-deficient factor, everything trimmed, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A dense oracle was requested for a matrix above the size guard.
    #[error("dense oracle refused: min dimension {dim} exceeds guard {guard}")]
    OracleTooLarge { dim: usize, guard: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LelaError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LelaError::Parameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        LelaError::Degenerate(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LelaError::Parameter(_) | LelaError::OracleTooLarge { .. } | LelaError::Parse(_) => 2,
            LelaError::Degenerate(_) => 3,
            LelaError::Io(_) | LelaError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LelaError>;
