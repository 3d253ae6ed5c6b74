use std::path::Path;

use thiserror::Error;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
            Self::Config(_) => 4,
        }
    }

    pub(crate) fn data(what: impl std::fmt::Display) -> Self {
        Self::Data(what.to_string())
    }

    pub(crate) fn config(what: impl std::fmt::Display) -> Self {
        Self::Config(what.to_string())
    }

    pub(crate) fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {e}", path.display()))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
