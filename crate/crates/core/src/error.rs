//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model evaluation, solvers, and scenario handling.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (sign, finiteness,
    /// dimension of a random vector, and so on).
    #[error("domain error: {0}")]
    Domain(String),

    /// A positive payload must be transmitted but the achievable rate is zero.
    #[error("infeasible delay: {payload_bits} bits cannot be delivered at zero rate")]
    InfeasibleDelay { payload_bits: f64 },

    /// Vector lengths disagree with the scenario fleet size.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A constraint cannot be satisfied by any admissible decision.
    #[error("infeasible: {constraint}")]
    Infeasible { constraint: String },

    /// A numerical routine failed to converge or returned an invalid result.
    #[error("numeric failure: {message} (residual {residual:.3e})")]
    Numeric { message: String, residual: f64 },

    /// Instance too large for an exact enumeration routine.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Scenario file could not be read, parsed, or failed an invariant.
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
