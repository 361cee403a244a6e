use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const TRAINING: i32 = 4;
    pub const INTEGRITY: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("integrity: {0}")]
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Parse { .. } => exit::PARSE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Training(_) => exit::TRAINING,
            CliError::Integrity(_) => exit::INTEGRITY,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_owned(), source }
    }

    pub(crate) fn parse(path: &Path, message: impl ToString) -> CliError {
        CliError::Parse { path: path.to_owned(), message: message.to_string() }
    }
}
