use fgboltz::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Failures mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or inputs: exit 1.
    #[error("{0}")]
    Usage(String),

    /// A checked property did not hold: exit 2.
    #[error("{0}")]
    Assertion(String),

    /// The solution became non-finite: exit 3.
    #[error("{0}")]
    BlowUp(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Core(e) => match e {
                Error::BlowUp { .. } => 3,
                Error::AssumptionViolation(_) | Error::Precision { .. } | Error::Reference(_) => 2,
                _ => 1,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json: {e}"))
    }
}
