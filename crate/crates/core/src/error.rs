use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the projection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input vector `{0}` is empty")]
    Empty(&'static str),
    #[error("input `{0}` contains a non-finite value")]
    NonFinite(&'static str),
    #[error("dimension mismatch for `{what}`: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dual multiplier must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("left derivative is undefined at sigma = 0")]
    LeftDerivativeAtZero,
    #[error(
        "the linear constraint normal is zero; route the instance to the plain simplex projection"
    )]
    ZeroNormal,
    #[error("problem is infeasible: min(a) = {min_a} > b = {b}")]
    Infeasible { min_a: f64, b: f64 },
    #[error("iteration limit of {0} exceeded")]
    MaxIterExceeded(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dense materialization refused: n = {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV line {line}: {kind}")]
    Csv { line: u64, kind: CsvIssue },
}

/// What went wrong on a particular line of a returns CSV.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvIssue {
    #[error("file contains no observations")]
    EmptyFile,
    #[error("ragged row: expected {expected} fields, found {found}")]
    Ragged { expected: usize, found: usize },
    #[error("non-numeric cell `{0}`")]
    NotNumeric(String),
    #[error("non-finite cell `{0}`")]
    NotFinite(String),
    #[error("{0}")]
    Reader(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
