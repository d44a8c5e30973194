use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing weights: tensor `{0}` not found")]
    MissingWeights(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bad magic in {what}: expected {expected:?}, found {found:?}")]
    BadMagic {
        what: &'static str,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),

    #[error("unknown dtype tag {0}")]
    UnknownDtype(u32),

    #[error("config error: {0}")]
    Config(String),

    #[error("image encoding: {0}")]
    Image(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable numeric code per error kind, surfaced by the CLI.
    pub fn code(&self) -> u32 {
        match self {
            Error::InvalidArgument(_) => 10,
            Error::MissingWeights(_) => 11,
            Error::ModelFormat(_) => 12,
            Error::Domain(_) => 13,
            Error::BadMagic { .. } => 20,
            Error::UnsupportedVersion(_) => 21,
            Error::Truncated(_) => 22,
            Error::DuplicateName(_) => 23,
            Error::UnknownDtype(_) => 24,
            Error::Config(_) => 30,
            Error::Image(_) => 31,
            Error::Io { .. } | Error::RawIo(_) => 40,
        }
    }
}
