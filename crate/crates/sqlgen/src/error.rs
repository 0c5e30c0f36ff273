use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SqlError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Parse { offset: usize, line: usize, col: usize, msg: String },
    #[error("dictionary has no entries")]
    EmptyDictionary,
    #[error("dictionary line {line}: {msg}")]
    DictionaryEntry { line: usize, msg: String },
}
