use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (codebook resolution, user count, hyperparameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Random generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    #[error("ingestion error in {path} at line {line}: {message}")]
    Ingestion {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("search space of {required} beams exceeds budget of {budget}")]
    SearchBudget { required: u128, budget: u128 },

    /// A NaN or infinity appeared in training state.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn ingestion(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
