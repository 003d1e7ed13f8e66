use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error("missing weights file {0}; run `mmaflc train` first or set identifier.weights")]
    MissingWeights(PathBuf),

    #[error("{path}: {source}")]
    Artifact {
        path: PathBuf,
        source: mmaflc::Error,
    },

    #[error("{context}{0}", context = .1.as_deref().map(|c| format!("{c}: ")).unwrap_or_default())]
    Core(mmaflc::Error, Option<String>),
}

impl CliError {
    pub fn invalid(field: &str, message: &str) -> Self {
        CliError::Invalid {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn core(err: mmaflc::Error) -> Self {
        CliError::Core(err, None)
    }

    pub fn in_context(err: mmaflc::Error, context: impl Into<String>) -> Self {
        CliError::Core(err, Some(context.into()))
    }

    /// 1 for bad input, 2 for a run that started and then failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Read { .. }
            | CliError::Parse { .. }
            | CliError::Invalid { .. }
            | CliError::MissingWeights(_)
            | CliError::Artifact { .. } => 1,
            CliError::Write { .. } => 2,
            CliError::Core(e, _) => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
        }
    }
}
