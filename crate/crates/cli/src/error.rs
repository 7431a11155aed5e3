//! CLI error classification and process exit codes.

use thiserror::Error;

/// Errors surfaced by the command-line pipelines, classified by exit code:
/// 2 for input problems, 3 for numerical failures, 4 for non-convergence
/// under `--strict`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numerical(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<trip_core::Error> for CliError {
    fn from(err: trip_core::Error) -> Self {
        use trip_core::Error::*;
        match &err {
            NotPositiveDefinite { .. } | NotCentered { .. } | SparsityTargetUnreached { .. } => {
                CliError::Numerical(err.to_string())
            }
            _ => CliError::Input(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
