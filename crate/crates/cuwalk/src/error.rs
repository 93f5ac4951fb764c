use std::process::ExitCode;

use thiserror::Error;

/// Failure of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A check the command exists to perform did not pass (exit 1).
    #[error("{0}")]
    Criterion(String),

    /// Malformed or inconsistent input (exit 2).
    #[error("input error: {0}")]
    Input(String),

    /// Well-formed input outside the method's assumptions (exit 3).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Criterion(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }
}

impl From<cuwalk_core::Error> for CliError {
    fn from(e: cuwalk_core::Error) -> Self {
        use cuwalk_core::Error as E;
        match e {
            E::VanishingOverlap(_) | E::Budget { .. } | E::DriverSynthesis | E::NotUnitary(_) => {
                CliError::Precondition(e.to_string())
            }
            E::Consistency(_) => CliError::Criterion(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
