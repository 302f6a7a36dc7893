use thiserror::Error;

pub type Result<T, E = UrnError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrnError {
    #[error("{field}: {reason}")]
    Validation { field: String, reason: String },

    /// A theorem hypothesis the requested computation depends on is not met.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A recorded path does not replay to its own series.
    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),
}

impl UrnError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        UrnError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            UrnError::Validation { .. } => "validation",
            UrnError::Hypothesis(_) => "hypothesis",
            UrnError::Integrity(_) => "integrity",
            UrnError::Capacity(_) => "capacity",
            UrnError::EmptySample(_) => "empty_sample",
        }
    }
}
