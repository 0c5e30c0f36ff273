use thiserror::Error;

#[derive(Debug, Error)]
pub enum CovError {
    #[error("unknown binary `{0}` in coverage layout")]
    UnknownBinary(String),
    #[error("length mismatch: snapshot has {snapshot} counters, table has {table}")]
    LengthMismatch { snapshot: usize, table: usize },
    #[error("region header malformed: {0}")]
    HeaderFormat(String),
    #[error("snapshot dump malformed: {0}")]
    DumpFormat(String),
    #[error("snapshot of {0} counters does not fit the fixed-width dump header")]
    DumpTooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Layout(#[from] blockplan::PlanError),
}
