use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("timestamps out of order at row {row}")]
    Ordering { row: usize },

    #[error("duplicate hour at row {row}")]
    Duplicate { row: usize },

    #[error("unrepairable gap from index {start} to {end} (exclusive): source sample {source_index:?} is missing")]
    UnrepairableGap {
        start: usize,
        end: usize,
        source_index: Option<usize>,
    },

    #[error("no available forecast covers target {target} at decision time {at}")]
    Availability { at: String, target: String },

    #[error("calibration failed for horizon {horizon}: {message}")]
    Calibration { horizon: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("information matrix is numerically singular after regularization")]
    Conditioning,

    #[error("invalid spline basis: {0}")]
    Basis(String),

    #[error("spline fit failed for {regime} regime: {message}")]
    Fit {
        regime: &'static str,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("series too short: need at least {needed} samples, got {got}")]
    Length { needed: usize, got: usize },

    #[error("objective is not finite at the start point")]
    Objective,

    #[error("no residuals left to evaluate after burn-in")]
    EmptyEvaluation,

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("index range error: {0}")]
    Range(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
