use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Matrix or vector sizes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Spatial sizes in the convolution stack do not work out.
    #[error("shape error: {0}")]
    Shape(String),
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// The operation is not permitted in the current model state.
    #[error("state error: {0}")]
    State(String),
    /// A rate whose denominator is zero.
    #[error("undefined rate: {0} has a zero denominator")]
    UndefinedRate(&'static str),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
