use std::path::{Path, PathBuf};

use thiserror::Error;
use wxo_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Validation(String),

    #[error("{} already exists; pass --force to overwrite", .0.display())]
    Overwrite(PathBuf),

    #[error("no history in {}", .0.display())]
    MissingHistory(PathBuf),

    #[error("every candidate in the population is infeasible")]
    Extinct,

    #[error(transparent)]
    Core(CoreError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::MissingHistory(_) => 2,
            CliError::Overwrite(_) => 3,
            CliError::Extinct => 4,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_)
                | CoreError::GridMismatch(_)
                | CoreError::ExtentMismatch(_)
                | CoreError::Format { .. }
                | CoreError::BadWeights(_)
                | CoreError::SizeLimit { .. }
                | CoreError::PopulationTooSmall { .. }
                | CoreError::AllZeroField
                | CoreError::ConstantField => 2,
                CoreError::ExtinctPopulation => 4,
                _ => 5,
            },
            CliError::Io { .. } | CliError::Internal(_) => 5,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ExtinctPopulation => CliError::Extinct,
            e => CliError::Core(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(format!("csv: {e}"))
    }
}
