use std::path::Path;

use tcf_core::TcfError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] TcfError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("nothing to render: every point is masked")]
    EmptyRender,
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, message: impl ToString) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}
