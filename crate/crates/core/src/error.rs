use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::dataio::IdxError;
use crate::diffcore::DiffError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diff(#[from] DiffError),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: String,
        epoch: usize,
        batch: usize,
    },
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Config,
    Data,
    Numeric,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Config => 2,
            FailureClass::Data => 3,
            FailureClass::Numeric => 4,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> FailureClass {
        match self {
            Error::Config(_) | Error::Invalid(_) => FailureClass::Config,
            Error::Idx(_)
            | Error::Io { .. }
            | Error::Data(_)
            | Error::ArchMismatch(_)
            | Error::Checkpoint(_) => FailureClass::Data,
            Error::Diff(DiffError::NonFinite { .. }) | Error::NonFinite { .. } => {
                FailureClass::Numeric
            }
            Error::Diff(_) => FailureClass::Data,
        }
    }
}
