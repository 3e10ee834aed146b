use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no header")]
    NoHeader,

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate id {id:?} on line {line}")]
    DuplicateId { id: String, line: u64 },

    #[error("census has no entry for cep3 codes {0:?} and no fallback is set")]
    MissingCensus(Vec<u16>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed model: {0}")]
    Model(String),

    #[error("unsupported model version {found} (this build reads version {supported})")]
    Version { found: u64, supported: u64 },

    #[error("exact Shapley enumeration supports at most {max} features, model has {n}; use the tree engine")]
    TooManyFeatures { n: usize, max: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration or validation errors, 3 for data errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::TooManyFeatures { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
