use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the factorization, data and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFiniteEncountered(&'static str),
    #[error("series too short: need at least {needed} time points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("degenerate ridge problem: {0}")]
    DegenerateRidge(String),
    #[error("index ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("no observed entries")]
    EmptyMask,
    #[error("missing values unsupported by {0}")]
    MissingValuesUnsupported(&'static str),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("ragged rows: row {row} has {got} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("unsupported model file version {0:?}")]
    VersionMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("{windows} windows of horizon {horizon} do not fit in {t_count} time points")]
    TooManyWindows {
        windows: usize,
        horizon: usize,
        t_count: usize,
    },
    #[error("denominator is zero (mean absolute truth)")]
    ZeroDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures raised by the numerical solvers rather than by
    /// malformed input or configuration.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotSpd { .. }
                | Error::NonFiniteEncountered(_)
                | Error::DegenerateRidge(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
