//! Error type shared across the crate.

use std::fmt;

/// Errors produced by solvers, the optimizer and the I/O layer.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration: bad parameter ranges, under-resolved grids,
    /// mismatched grids, scheme outside its documented envelope.
    Config(String),
    /// Numerical failure (blow-up, non-finite values) at a given time step.
    Numerical { what: String, step: usize },
    /// Admissibility constraint violated (bounds or mass).
    Constraint(String),
    /// Text-format parse failure with a 1-based line number.
    Parse { line: usize, msg: String },
    /// Filesystem failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Numerical { what, step } => write!(f, "{what} at step {step}"),
            Error::Constraint(msg) => write!(f, "constraint error: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code for the CLI: 1 config/constraint/parse, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Constraint(_) | Error::Parse { .. } => 1,
            Error::Numerical { .. } => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
