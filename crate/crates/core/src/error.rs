use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A type invariant failed at construction; the payload names the rule.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Water-filling needs a strictly positive power price.
    #[error("power price must be positive, got {0}")]
    NonPositivePrice(f64),

    #[error("MAC stationarity solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate ellipsoid cut (g'Pg = {0:e})")]
    DegenerateCut(f64),

    #[error("problem too large for exhaustive search: N = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("barrier solve failed: {0}")]
    BarrierFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invariant(name: impl Into<String>) -> Error {
    Error::InvariantViolation(name.into())
}
