use qgc_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// An exact identity check did not hold.
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Verify(_) => 5,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }

    /// Prefixes the message with the run that raised it.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Unsupported(m) => CliError::Unsupported(format!("{ctx}: {m}")),
            CliError::Budget(m) => CliError::Budget(format!("{ctx}: {m}")),
            CliError::Verify(m) => CliError::Verify(format!("{ctx}: {m}")),
            CliError::Other(m) => CliError::Other(format!("{ctx}: {m}")),
            io @ CliError::Io { .. } => io,
        }
    }

    /// Core errors raised while resolving the config are validation errors.
    pub fn config(e: CoreError) -> Self {
        match e {
            CoreError::Unsupported(m) => CliError::Unsupported(m),
            e @ CoreError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Unsupported(m) => CliError::Unsupported(m),
            e @ (CoreError::BudgetExceeded { .. } | CoreError::NotEnumerated(_) | CoreError::RejectionCap(_)) => {
                CliError::Budget(e.to_string())
            }
            e @ (CoreError::EmptyTypicalSet { .. } | CoreError::InvalidParameter(_)) => CliError::Config(e.to_string()),
            e => CliError::Other(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
