use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("points {first} and {second} have identical coordinates; deduplicate before building the graph")]
    DuplicatePoints { first: usize, second: usize },

    #[error("problem has {size} variables but the exact solver is limited to {limit}; use {alternative}")]
    TooLarge {
        size: usize,
        limit: usize,
        alternative: &'static str,
    },

    #[error("input contains no points")]
    EmptyInput,

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("level {level} out of range; valid levels are 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
