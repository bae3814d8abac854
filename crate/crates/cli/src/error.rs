use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nitsche_core::Error),

    #[error("cli::run: invalid configuration: field `{field}`: {detail}")]
    Config { field: &'static str, detail: String },

    #[error("cli::io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cli::run: non-finite result: {0}")]
    NonFinite(String),
}

impl CliError {
    pub fn config(field: &'static str, detail: impl Into<String>) -> Self {
        CliError::Config { field, detail: detail.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 configuration, 3 numeric failure, 4 regime error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::NonFinite(_) => 3,
        }
    }
}
