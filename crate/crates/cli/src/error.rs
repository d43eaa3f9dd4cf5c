use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] xgroup_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for anything wrong with the inputs, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        use xgroup_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Parameter(_) | E::Data { .. } | E::UnseenCategory { .. } | E::Csv(_) | E::Json(_)) => 2,
            _ => 1,
        }
    }
}
