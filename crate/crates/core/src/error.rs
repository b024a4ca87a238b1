//! Error type shared by every module in the crate.

use alloc::string::String;
use core::fmt;

/// Errors reported by simulation, training, and analysis routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument was outside its documented domain.
    InvalidArgument(String),
    /// The request exceeds a hard resource bound (qubit count, moment depth).
    Capacity(String),
    /// Two operands had incompatible dimensions.
    DimensionMismatch { expected: usize, got: usize },
    /// An encoded circuit tensor violates the encoding rules.
    MalformedTensor(String),
    /// An iterative routine failed to converge within its iteration budget.
    NoConvergence(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedTensor(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::MalformedTensor(m) => write!(f, "malformed circuit tensor: {m}"),
            Error::NoConvergence(m) => write!(f, "no convergence: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
