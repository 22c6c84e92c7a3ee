//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction-time parameter validation failed.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A pointwise evaluation that has no finite value (e.g. the critical
    /// steady profile at the origin).
    #[error("unbounded value: {0}")]
    Unbounded(String),

    /// Malformed user input (scenario files, tables, test functions).
    #[error("input error: {0}")]
    Input(String),

    /// A quadrature did not reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// A root finder could not bracket or converge.
    #[error("root finding failure: {0}")]
    RootFinding(String),

    /// Time integration gave up (dt underflow, Newton divergence, ...).
    /// Carries the time of failure and a short dump of the offending state.
    #[error("solver failure at t = {t}: {reason}")]
    SolverFailure { t: f64, reason: String },

    /// The Duhamel fixed-point iteration detected non-contraction; the
    /// requested horizon is too long for the oracle.
    #[error("oracle inapplicable: {0}")]
    OracleInapplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
