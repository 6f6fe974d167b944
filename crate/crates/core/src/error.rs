use thiserror::Error;

/// Errors raised while assembling problems, stepping schemes or running experiments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite {quantity} at index {index}")]
    NonFinite { quantity: &'static str, index: usize },

    #[error("numerical blow-up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },

    #[error("{scheme} requires {requirement}")]
    Unsupported {
        scheme: &'static str,
        requirement: &'static str,
    },

    #[error("grid of {grid} points is too small for {modes} modes (need at least {required})")]
    Aliasing { grid: usize, modes: usize, required: usize },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
