use thiserror::Error;

/// Failure of an experiment run, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input data.
    #[error("configuration error: {0}")]
    Config(String),

    /// A solver or numeric routine failed during play.
    #[error("numeric failure: {0}")]
    Numeric(#[source] ftrl_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
