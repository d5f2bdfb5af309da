use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("too few samples: need at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("input {var} of row {row} is outside the declared domain")]
    DomainViolation { row: usize, var: usize },

    #[error("function is constant (gradient trace {trace:e}); concordance is undefined")]
    ConstantFunction { trace: f64 },

    #[error("basis matrix is rank deficient")]
    RankDeficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty group for model {0}")]
    EmptyGroup(usize),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{} already exists (use --force to overwrite)", .0.display())]
    OutputExists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
