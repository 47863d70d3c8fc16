use std::path::{Path, PathBuf};

use keytrace_core::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Unparseable or inconsistent input file; `field` names the offending entry.
    #[error("{path}: invalid `{field}`: {message}")]
    Format { path: PathBuf, field: String, message: String },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("{stage} stage failed: {source}")]
    Stage { stage: &'static str, source: CoreError },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Format { .. } | CliError::Params(_) => EXIT_INPUT,
            CliError::Stage { .. } => EXIT_STAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Format { path: path.to_path_buf(), field: field.into(), message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e.stage() {
            Some(stage) => CliError::Stage { stage: stage.name(), source: e },
            None => match e {
                CoreError::Config(m) | CoreError::InvalidInput(m) | CoreError::Generation(m) => CliError::Params(m),
                other => CliError::Internal(other.to_string()),
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
