use std::fmt::Display;

/// Failure of a CLI verb. Each variant maps to a fixed process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or invalid configuration (exit 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Dataset or checkpoint could not be read or is malformed (exit 2).
    #[error("data error: {0}")]
    Data(String),
    /// Checkpoint architecture differs from the configured preset (exit 3).
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    /// Manifests disagree on the metric being compared (exit 4).
    #[error("metric conflict: {0}")]
    MetricConflict(String),
    /// Anything else, including training failures and output I/O (exit 5).
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Architecture(_) => 3,
            CliError::MetricConflict(_) => 4,
            CliError::Other(_) => 5,
        }
    }

    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn data(e: impl Display) -> Self {
        CliError::Data(e.to_string())
    }

    pub fn other(e: impl Display) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<sico::Error> for CliError {
    fn from(e: sico::Error) -> Self {
        use sico::Error as E;
        match e {
            E::Config(_) => CliError::Config(e.to_string()),
            E::Input(_) | E::Data(_) | E::Format { .. } | E::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
