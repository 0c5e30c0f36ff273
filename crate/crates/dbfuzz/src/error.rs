use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("config {path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },

    #[error("planning: {0}")]
    Plan(#[from] blockplan::PlanError),

    #[error("coverage: {0}")]
    Coverage(#[from] covmap::CovError),

    #[error("generation: {0}")]
    Generation(#[from] sqlgen::SqlError),

    /// The target could not be launched or kept alive.
    #[error("target: {0}")]
    Target(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FuzzError {
    pub fn config(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> FuzzError {
        FuzzError::Config { path: path.into(), line, msg: msg.into() }
    }

    /// Process exit code for this failure: 1 config/usage, 2 planning or
    /// data handling, 3 target trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            FuzzError::Config { .. } => 1,
            FuzzError::Plan(_) | FuzzError::Coverage(_) | FuzzError::Generation(_) | FuzzError::Io(_) => 2,
            FuzzError::Target(_) => 3,
        }
    }
}
