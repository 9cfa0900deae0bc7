use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] semibayes::Error),

    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit code: 2 for bad input, 3 for numerical aborts, 4 for
    /// exceeded combinatorial budgets.
    pub fn exit_code(&self) -> u8 {
        use semibayes::Error as E;
        match self {
            CliError::Core(E::BudgetExceeded { .. } | E::SubsetBudget { .. }) => 4,
            CliError::Core(
                E::NonFinite { .. }
                | E::LoglikDrift { .. }
                | E::Singular(_)
                | E::EmptyChain
                | E::GridTooNarrow { .. },
            ) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
