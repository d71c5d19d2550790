use std::path::PathBuf;

use serde::Serialize;
use stochtransit_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("store is locked by another process ({0})")]
    Locked(PathBuf),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse { path: path.into(), msg: msg.to_string() }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(CoreError::UnknownId { .. }) => "unknown_id",
            Error::Core(CoreError::InvalidInput(_)) => "invalid_input",
            Error::Core(CoreError::InvalidConfig(_)) => "invalid_config",
            Error::Core(CoreError::InsufficientData(_)) => "insufficient_data",
            Error::Core(CoreError::Numerical(_)) => "numerical",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Input(_) => "invalid_input",
            Error::Locked(_) => "locked",
        }
    }

    /// Machine-readable form written to stderr by the CLI.
    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: u8,
}
