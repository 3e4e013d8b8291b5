use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("tensor file: {0}")]
    Format(#[from] FormatError),

    #[error("combined record carries no delay schedule")]
    MissingSchedule,
}

/// Failures decoding a PATD tensor container.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload")]
    Truncated,
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("declared dimensions exceed file size")]
    OversizedDims,
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("{0} trailing bytes after last entry")]
    TrailingBytes(usize),
}

impl FormatError {
    /// Stable numeric code, shared with the C interface.
    pub fn code(&self) -> i32 {
        match self {
            FormatError::BadMagic(_) => 10,
            FormatError::UnsupportedVersion(_) => 11,
            FormatError::Truncated => 12,
            FormatError::DuplicateName(_) => 13,
            FormatError::OversizedDims => 14,
            FormatError::InvalidName => 15,
            FormatError::TrailingBytes(_) => 16,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable numeric code, shared with the C interface. Zero is reserved for success.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::InvalidArgument(_) => 3,
            Error::ShapeMismatch(_) => 4,
            Error::Io { .. } => 5,
            Error::Parse { .. } => 6,
            Error::MissingSchedule => 7,
            Error::Format(f) => f.code(),
        }
    }
}
