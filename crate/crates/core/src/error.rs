use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate rank-one update: denominator {denominator:e} <= floor {floor:e}")]
    DegenerateUpdate { denominator: f64, floor: f64 },

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("surrogate projection is not invertible")]
    SingularSurrogate,

    #[error("invalid decay profile: {0}")]
    InvalidProfile(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sketch size k = {k} must be smaller than the spectrum rank {rank}")]
    KExceedsRank { k: usize, rank: usize },

    #[error("system matrix has a zero singular value")]
    SingularSystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Input grammar violations for libsvm and dense CSV data.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    EmptyInput,
    Malformed { line: usize, message: String },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::EmptyInput => write!(f, "parse error: empty input"),
            ParseError::Malformed { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for ParseError {}
