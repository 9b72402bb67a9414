use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent data; exit code 2.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Data error that names `path`, unless the message already does.
pub fn at(path: &Path, e: impl Display) -> CliError {
    let msg = e.to_string();
    let shown = path.display().to_string();
    if msg.contains(&shown) {
        CliError::Data(msg)
    } else {
        CliError::Data(format!("{shown}: {msg}"))
    }
}
