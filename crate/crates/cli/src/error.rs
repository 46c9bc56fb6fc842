//! CLI-facing error type with process exit-code mapping.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 data or file error,
//! 4 numerical failure. Core errors map onto these buckets at the call
//! sites that know the context (a shape mismatch while reading a file is a
//! data error; a bad learning rate is a configuration error).

use std::fmt;

/// Top-level error for command execution.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit code 2).
    Config(String),
    /// Missing, malformed, or inconsistent data files (exit code 3).
    Data(String),
    /// Numerical failure such as divergent training (exit code 4).
    Numerical(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self::Numerical(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "configuration error: {msg}"),
            Self::Data(msg) => write!(f, "data error: {msg}"),
            Self::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

/// Core numerical errors keep their class; everything else from the core
/// crate surfaces as a data error unless the call site wraps it explicitly.
impl From<cyclosense_core::Error> for CliError {
    fn from(e: cyclosense_core::Error) -> Self {
        match e {
            cyclosense_core::Error::Numerical(msg) => Self::Numerical(msg.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
