use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (ranges, sizes, flags).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A parameter range violating its ordering or positivity constraint.
    #[error("invalid {field} range {lo}:{hi}: {reason}")]
    InvalidRange {
        field: &'static str,
        lo: f64,
        hi: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// Malformed input record; `location` is e.g. "line 3" or "record 17".
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Structurally valid input whose contents violate an invariant.
    #[error("invalid data: {0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image decode error: {0}")]
    Image(#[from] image::ImageError),

    #[error("manifest error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Attach the offending file path to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad configuration rather than bad data or IO.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidRange { .. } => true,
            Error::File { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
