//! Engine-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("query syntax error at {line}:{col}: {message}")]
    QuerySyntax { line: u32, col: u32, message: String },

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("density factor must be within [0, 1], got {0}")]
    InvalidDensity(f64),

    #[error("property sets are not in strict subset relation")]
    NotStrictSubset,

    #[error(
        "assignment enumeration requires {required} candidates, budget is {budget}; \
         use the greedy algorithm"
    )]
    EnumerationBudget { required: u128, budget: u64 },

    #[error("unknown column {column} in table {table}")]
    UnknownColumn { table: u32, column: u64 },

    #[error("{0} is not a database directory")]
    NotADatabase(PathBuf),

    #[error("database directory {0} is not empty")]
    DbDirNotEmpty(PathBuf),

    #[error("unsupported format version {found} in {file} (expected {expected})")]
    VersionMismatch {
        file: String,
        found: u16,
        expected: u16,
    },

    #[error("corrupt database file {file}: {reason}")]
    Corrupt { file: String, reason: String },
}

impl Error {
    pub(crate) fn corrupt(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            file: file.into(),
            reason: reason.into(),
        }
    }
}
