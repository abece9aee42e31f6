use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty client set")]
    EmptyClientSet,

    #[error("dense Hessian requested for d = {d}, cap is {cap}")]
    DenseCapExceeded { d: usize, cap: usize },

    #[error("conjugate gradient breakdown at iteration {iteration}: {reason}")]
    CgBreakdown { iteration: usize, reason: String },

    #[error("empty step-size candidate set")]
    EmptyCandidateSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line-search loss table incomplete: {0}")]
    IncompleteLossTable(String),

    #[error("local optimization diverged: {0}")]
    Diverged(String),

    #[error("all {active} active clients failed in round {round}")]
    AllClientsFailed { round: usize, active: usize },

    #[error("libsvm parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset cache: {0}")]
    Cache(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("reference trace is empty")]
    EmptyTrace,

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
