use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {malformed} of {total} records malformed (limit 1%)")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },

    #[error("unknown {kind} token {token:?}")]
    UnknownToken { kind: &'static str, token: String },

    #[error("selection count {0} exceeds 4")]
    TooManySelections(usize),

    #[error("context entry has no selections")]
    NoSelections,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("nothing to interpolate: heart-rate series is empty")]
    EmptyInterpolation,

    #[error("hands share no common time span")]
    NoOverlap,

    #[error("empty feature matrix")]
    EmptyFeatureMatrix,

    #[error("empty after context filter")]
    EmptyAfterFilter,

    #[error("single-class training data")]
    SingleClass,

    #[error("schema mismatch: missing columns {missing:?}, extra columns {extra:?}")]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
