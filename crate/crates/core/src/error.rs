use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Bad or missing configuration, e.g. a mapped CSV column that does not exist.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A precondition between two objects does not hold (wrong vocabulary,
    /// model not trained on field tokens, mismatched detector order, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty input: {0}")]
    Empty(String),

    /// A remote dependency (e.g. an external scorer) could not be reached.
    #[error("service unavailable: {0}")]
    Unavailable(String),

    /// Malformed persisted data.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
