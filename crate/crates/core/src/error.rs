use alloc::string::String;
use core::fmt;

/// Error type shared by every module in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated (empty input, bad
    /// configuration value, out-of-range request).
    InvalidInput(String),
    /// Two buffers or matrices that must agree in shape do not.
    Shape {
        expected: String,
        got: String,
        context: &'static str,
    },
    /// A numeric invariant broke at runtime (NaN/Inf loss, divergence).
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Shape {
                expected,
                got,
                context,
            } => write!(f, "shape mismatch in {context}: expected {expected}, got {got}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
