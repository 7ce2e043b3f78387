use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] bgcusum_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("CSV input: {0}")]
    Csv(#[from] csv::Error),
    #[error("no column named {0:?} in the CSV header")]
    MissingColumn(String),
    #[error("inconclusive: {0}")]
    Inconclusive(&'static str),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
