//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Errors raised while validating inputs, sampling, solving or reporting.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data or configuration violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A value in the input series is NaN or infinite (1-based time index).
    #[error("missing value at t={t} in column `{column}`")]
    MissingValue { column: String, t: usize },

    /// The series is shorter than the difference order allows.
    #[error("series too short: n={n} but difference order {order} needs n >= {min}")]
    SeriesTooShort { n: usize, order: usize, min: usize },

    /// A linear algebra or sampling step produced a non-finite or singular quantity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A Gibbs component failed; carries the sweep index (0-based, burn-in included).
    #[error("sampler failed at sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    /// Coordinate descent hit its iteration cap.
    #[error("solver did not converge at lambda index {lambda_index} after {iterations} sweeps")]
    NoConvergence {
        lambda_index: usize,
        iterations: usize,
    },

    /// Input file could not be parsed (1-based row index of the data row).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Artifact written by an incompatible version.
    #[error("incompatible artifact version {found} (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (as opposed to numeric trouble).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::MissingValue { .. }
                | Error::SeriesTooShort { .. }
                | Error::Parse { .. }
                | Error::ArtifactVersion { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
