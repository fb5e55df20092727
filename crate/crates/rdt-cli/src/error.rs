//! Error type carrying the process exit code.
//!
//! Exit codes: 0 success, 1 usage (bad flags or argument domains), 2 runtime
//! (training divergence, malformed file content, failed invariants), 3 I/O
//! (the operating system refused a read or write).

use rdt_core::RdtError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<RdtError> for CliError {
    fn from(e: RdtError) -> Self {
        match e {
            RdtError::InvalidParameter(_) | RdtError::DimensionMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
