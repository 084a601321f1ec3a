use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] cdsense::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(cdsense::Error::InvalidParameter(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } | CliError::ValidationFailed { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
