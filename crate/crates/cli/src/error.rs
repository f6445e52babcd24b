use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error ({origin}): {msg}")]
    Config { origin: String, msg: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: uwbfp::Error },
    #[error(transparent)]
    Pipeline(#[from] uwbfp::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Pipeline(_) => EXIT_PIPELINE,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, source: uwbfp::Error) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            source,
        }
    }
}
