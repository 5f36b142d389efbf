//! CLI error type with the process exit codes each failure class maps to.

use std::fmt;

/// Exit code 2: the configuration (file, override, or flag) is unusable.
/// Exit code 3: a numerical routine failed or an estimate left its trusted
/// region. Exit code 4: a required artifact (checkpoint) is absent or does
/// not match. Exit code 1: anything else, typically I/O.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    MissingArtifact(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::MissingArtifact(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::MissingArtifact(m) => write!(f, "missing artifact: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<scoremetry::Error> for CliError {
    fn from(e: scoremetry::Error) -> Self {
        use scoremetry::Error;
        match e {
            Error::Numerical(m) => CliError::Numerical(m),
            Error::Diverged(m) => CliError::Numerical(format!("diverged: {m}")),
            Error::Checkpoint(m) => CliError::MissingArtifact(m),
            Error::InvalidArgument(m) => CliError::Config(m),
            Error::DimensionMismatch(m) => CliError::Config(m),
            Error::Io(e) => CliError::Other(format!("io error: {e}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("io error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
