use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] bvo_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version { what: &'static str, found: u32, expected: u32 },
    #[error("external objective: {0}")]
    Protocol(String),
    #[error("external objective did not answer within {0} ms")]
    Timeout(u64),
    #[error("{0}")]
    Config(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format { path: path.into(), message: message.to_string() }
    }

    /// Short machine-readable kind for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(bvo_core::Error::NonFiniteObjective { .. }) => "non_finite_objective",
            Self::Core(bvo_core::Error::Training { .. }) => "training",
            Self::Core(bvo_core::Error::SpaceTooLarge(_)) => "space_too_large",
            Self::Core(_) => "contract",
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
            Self::Version { .. } => "version",
            Self::Protocol(_) => "protocol",
            Self::Timeout(_) => "timeout",
            Self::Config(_) => "config",
        }
    }
}
