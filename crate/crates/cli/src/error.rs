use std::process::ExitCode;

/// Failures mapped onto the fixed exit-code taxonomy.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("missing artifact: {0}")]
    Missing(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Core(distmap::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Spec(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Diverged(_) => 4,
            CliError::Mismatch(_) => 5,
            CliError::BadInput(_) => 6,
            CliError::Core(_) | CliError::Io(_) => 1,
        })
    }
}

impl From<distmap::Error> for CliError {
    fn from(e: distmap::Error) -> Self {
        match e {
            distmap::Error::Diverged { .. } | distmap::Error::NonFiniteGradient(_) => {
                CliError::Diverged(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
