use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for configuration errors (including malformed suites).
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failed check assertions.
pub const EXIT_ASSERTION: i32 = 1;
/// Exit status when results could not be written.
pub const EXIT_OUTPUT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error: {0}")]
    Core(#[from] ipslab_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Core(_)
            | CliError::Read { .. }
            | CliError::Json { .. } => EXIT_CONFIG,
            CliError::Write { .. } | CliError::Csv(_) => EXIT_OUTPUT,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
