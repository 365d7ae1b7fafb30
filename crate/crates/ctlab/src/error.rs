use std::path::PathBuf;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::InsufficientData(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

/// Core errors raised while validating a spec are configuration problems;
/// anything else surfacing mid-run is an internal fault.
pub(crate) fn from_core_setup(e: ctlab_core::Error) -> CliError {
    match e {
        ctlab_core::Error::InsufficientData(m) => CliError::InsufficientData(m),
        other => CliError::Config(other.to_string()),
    }
}

pub(crate) fn from_core_run(e: ctlab_core::Error) -> CliError {
    match e {
        ctlab_core::Error::InsufficientData(m) => CliError::InsufficientData(m),
        ctlab_core::Error::Configuration(m) => CliError::Config(m),
        other => CliError::Internal(other.to_string()),
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
