//! Crate-wide error type.
//!
//! Variants map onto the process exit codes used by the `oodforge` binary:
//! configuration/usage problems exit 1, data problems (files, parsing, shape
//! mismatches against stored artifacts) exit 2, and numerical failures
//! (non-finite losses, starved samplers) exit 3.

use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration: bad hyperparameter, inconsistent spec, misuse
    /// of an operation contract.
    Config(String),
    /// A dataset, checkpoint, or report file could not be read, written, or
    /// parsed. `line` is 1-based when the problem is tied to a text row.
    Data {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },
    /// Underlying I/O failure.
    Io { path: PathBuf, source: std::io::Error },
    /// Numerical failure: non-finite value where a finite one is required,
    /// or a sampler that cannot make progress.
    Numeric(String),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { path: None, line: None, msg: msg.into() }
    }

    pub fn data_at(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Data { path: Some(path.into()), line: Some(line), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit code for the CLI: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data { .. } | Error::Io { .. } => 2,
            Error::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Data { path, line, msg } => {
                write!(f, "data error")?;
                if let Some(p) = path {
                    write!(f, " in {}", p.display())?;
                }
                if let Some(l) = line {
                    write!(f, " at line {l}")?;
                }
                write!(f, ": {msg}")
            }
            Error::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            Error::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
