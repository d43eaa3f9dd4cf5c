use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The call is well-typed but violates an operation's precondition
    /// (wrong group, empty sample, unknown group id, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: expected {expected} features, found {found}")]
    Shape { expected: usize, found: usize },

    /// A model invariant was found broken at runtime.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("sampler exhausted after {drawn} draws")]
    Exhausted { drawn: usize },

    #[error("test pair source ran dry after {completed} of {requested} trials")]
    TrialsExhausted { completed: usize, requested: usize },

    #[error("{path}:{line}: {message}")]
    Data {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("unknown category {value:?} in column {column:?}")]
    UnseenCategory { column: String, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
