use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field sums to zero and no normalization floor was given")]
    AllZeroField,

    #[error("field is constant; min-max scaling is undefined")]
    ConstantField,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("physical extents differ: {0}")]
    ExtentMismatch(String),

    #[error("malformed field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("weights must be nonnegative and sum to one (sum = {0})")]
    BadWeights(f64),

    #[error("problem size {size} exceeds the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("population too small: need at least {need}, have {have}")]
    PopulationTooSmall { need: usize, have: usize },

    #[error("stiffness matrix is not positive definite (pivot {pivot} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("no element reaches the solid threshold")]
    EmptySolidSet,

    #[error("could not bracket the MMA dual variable")]
    DualBisectionFailed,

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("every candidate in the population is infeasible")]
    ExtinctPopulation,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
