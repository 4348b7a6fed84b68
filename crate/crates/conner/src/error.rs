use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("{failed} of {total} items failed")]
    PartialFailure { failed: usize, total: usize },
    #[error("{}: line {line}: {msg}", path.display())]
    Schema { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] conner_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Unavailable(_) => 3,
            Error::PartialFailure { .. } => 4,
            Error::Schema { .. } | Error::Data(_) => 5,
            Error::Core(conner_core::Error::BackendUnavailable(_)) => 3,
            Error::Core(_) | Error::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
