use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or input data (exit 2).
    #[error("{0}")]
    Config(String),
    /// The solver stopped on a non-finite state or a majorant violation (exit 3).
    #[error("numerical abort: {0}")]
    Numerical(polykin::Error),
    /// A hard invariant of a verification suite failed (exit 4).
    #[error("{0}")]
    Invariant(String),
    /// Anything else, e.g. an unwritable output path (exit 1).
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn other(msg: impl Into<String>) -> Self {
        CliError::Other(msg.into())
    }

    /// Classifies a library error raised while running, rather than while validating input.
    pub fn from_run(e: polykin::Error) -> Self {
        match e {
            polykin::Error::MajorantViolation { .. } | polykin::Error::NonFinite { .. } => CliError::Numerical(e),
            polykin::Error::Domain(m) => CliError::Config(m),
            other => CliError::Other(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Adds the offending file path to an I/O error.
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}
