use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector component {index} is NaN or infinite")]
    NonFinite { index: usize },

    #[error("dataset must contain at least one vector")]
    EmptyDataset,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("predicate kind does not match stored features: {0}")]
    PredicateType(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("node {0} not found or already deleted")]
    NotFound(u32),

    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: u64, reason: String },

    /// Structural validation failure; `check` names the invariant that failed.
    #[error("validation failed [{check}]: {detail}")]
    Validation { check: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { name, reason: reason.into() }
    }

    pub(crate) fn validation(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation { check, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
