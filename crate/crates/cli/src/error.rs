use std::path::PathBuf;

use thiserror::Error;

/// Process exit code for configuration and input errors.
pub const EXIT_INVALID: i32 = 2;
/// Process exit code when a run aborts after starting.
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing results: {0}")]
    Csv(#[from] csv::Error),

    #[error("run aborted: {0}")]
    Runtime(#[from] rpreg::Error),

    #[error("{failed} of {total} runs aborted; first failure: {first}")]
    Aborted {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => EXIT_INVALID,
            _ => EXIT_ABORTED,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
