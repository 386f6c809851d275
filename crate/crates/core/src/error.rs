//! Error type shared across the crate.

use std::fmt;

/// Errors produced by solver, operator, metric and I/O routines.
#[derive(Debug)]
pub enum Error {
    /// Shape or size mismatch between grids/operators.
    Dimension(String),
    /// Invalid configuration value (non-positive sigma, k too large, ...).
    Config(String),
    /// Non-finite values encountered while iterating; carries the outer
    /// iteration index when one is known.
    Numerical {
        iteration: Option<usize>,
        message: String,
    },
    /// Malformed or unsupported file content.
    Format(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(iteration: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Numerical {
            iteration,
            message: msg.into(),
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Numerical { iteration, message } => match iteration {
                Some(k) => write!(f, "numerical error at iteration {k}: {message}"),
                None => write!(f, "numerical error: {message}"),
            },
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
