use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned dataset: Cholesky failed after jitter sequence {jitters:?}")]
    IllConditioned { jitters: Vec<f64> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate truth range: max and min of the truth field coincide")]
    DegenerateTruthRange,

    #[error("baseline vibration must be positive and finite")]
    InvalidBaseline,

    #[error("episode failed at iteration {iteration}: {source}")]
    EpisodeFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("could not parse config: {0}")]
    ConfigParse(String),

    #[error("{path}: line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
