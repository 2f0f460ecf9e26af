use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller supplied an invalid argument or configuration.
    Usage,
    /// Input data was malformed, degenerate or otherwise unusable.
    Data,
    /// Reading or writing the filesystem failed.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dorf record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate image: mean {mean:e} is below {threshold:e}")]
    Degenerate { mean: f64, threshold: f64 },

    #[error("unknown ablation tag `{tag}` (valid: {valid})")]
    UnknownAblation { tag: String, valid: String },

    #[error("unknown feature layer `{0}`")]
    UnknownLayer(String),

    #[error("unknown curve id `{0}`")]
    UnknownCurve(String),

    #[error("config: {0}")]
    Config(String),

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Encode { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParam(_)
            | Error::UnknownAblation { .. }
            | Error::UnknownLayer(_)
            | Error::Config(_) => ErrorClass::Usage,
            Error::Io { .. } | Error::Encode { .. } => ErrorClass::Io,
            Error::Contract(_)
            | Error::ShapeMismatch { .. }
            | Error::Parse { .. }
            | Error::Empty(_)
            | Error::Degenerate { .. }
            | Error::UnknownCurve(_)
            | Error::Decode { .. } => ErrorClass::Data,
        }
    }
}
