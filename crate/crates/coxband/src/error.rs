//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in model fitting, resampling, and band
/// construction. Data problems are reported with enough context to locate
/// the offending row; numerical failures carry the state needed to explain
/// them.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dataset contains no rows")]
    EmptyDataset,

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("row {row}: expected {expected} covariates, got {got}")]
    CovariateDimension {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} lies beyond the dataset horizon {tau}")]
    QueryBeyondTau { t: f64, tau: f64 },

    #[error(
        "partial likelihood is monotone: |beta| reached {beta_norm:.1} after {iterations} \
         iterations (typically caused by a covariate that separates the event order)"
    )]
    MonotoneLikelihood { iterations: usize, beta_norm: f64 },

    #[error("information matrix is singular at iteration {iteration}")]
    SingularInformation { iteration: usize },

    #[error("Newton iteration did not converge within {iterations} iterations")]
    DidNotConverge { iterations: usize },

    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error("{got} replicates are too few for the requested level (need at least {required})")]
    TooFewReplicates { required: usize, got: usize },

    #[error("bootstrap variance is zero at grid time {t}; equal-precision weights are undefined")]
    ZeroVarianceOnGrid { t: f64 },

    #[error("estimate is zero at grid time {t}; the log transform is undefined there")]
    ZeroEstimateOnGrid { t: f64 },

    #[error("no event time falls inside the band interval [{t1}, {t2}]")]
    NoEventsInInterval { t1: f64, t2: f64 },

    #[error("no bootstrap replicate converged; nothing to build a band from")]
    NoConvergedReplicates,

    #[error(
        "regeneration limit reached: {accepted} repetitions accepted after {attempts} attempts"
    )]
    RegenerationLimit { attempts: usize, accepted: usize },
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            message: message.into(),
        }
    }
}
