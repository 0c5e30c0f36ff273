use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("manifest syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("edge endpoint `{block}` is not a declared block of function `{function}`")]
    DanglingEdge { function: String, block: String },
    #[error("duplicate block `{block}` in function `{function}`")]
    DuplicateBlock { function: String, block: String },
    #[error("duplicate edge {src} -> {dst} in function `{function}`")]
    DuplicateEdge { function: String, src: String, dst: String },
    #[error("duplicate function `{function}`")]
    DuplicateFunction { function: String },
    #[error("entry block `{entry}` of function `{function}` was never declared")]
    MissingEntry { function: String, entry: String },
    #[error("duplicate binary id `{binary}`")]
    DuplicateBinary { binary: String },
    #[error("name `{name}` contains the reserved dummy-block marker")]
    ReservedName { name: String },
    #[error("collision load is undefined for zero counters")]
    ZeroCounters,
    #[error("layout file format error at line {line}: {msg}")]
    LayoutFormat { line: usize, msg: String },
}
