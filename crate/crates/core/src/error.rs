use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the planning core.
///
/// Input problems and numerical failures are kept apart so front ends can
/// map them to different exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A stop, route or edge identifier that does not resolve.
    UnknownId { kind: &'static str, id: String },
    /// Structurally invalid input (coordinates, lengths, ranges, ...).
    InvalidInput(String),
    /// Invalid configuration value.
    InvalidConfig(String),
    /// Not enough data to carry out the requested operation.
    InsufficientData(String),
    /// A factorization or integration failed to produce a usable result.
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        Error::UnknownId { kind, id: id.into() }
    }

    /// True for failures caused by the caller's input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownId { kind, id } => write!(f, "unknown {kind} id `{id}`"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            Error::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl core::error::Error for Error {}
