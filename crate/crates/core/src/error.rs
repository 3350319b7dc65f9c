use std::io;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,

    #[error("checkpoint format error: {0}")]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reasons a checkpoint or parameter file fails to load.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file truncated")]
    Truncated,
    #[error("malformed content: {0}")]
    Malformed(String),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) => 3,
            Error::Numeric(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
