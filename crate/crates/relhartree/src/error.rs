use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction or grid/field compatibility problems.
    #[error("grid error: {0}")]
    Grid(String),

    /// A spectral symbol evaluated to a non-finite value at some wavevector.
    #[error("symbol non-finite at |2 pi s| = {at}")]
    BadSymbol { at: f64 },

    /// Invalid physical or algorithmic parameters.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A resolution or support precondition failed (field cannot be
    /// represented faithfully on the requested grid).
    #[error("resolution: {0}")]
    Resolution(String),

    /// Iteration budget exhausted before reaching the requested tolerance.
    #[error("no convergence after {iterations} iterations (last {quantity} = {value:.3e})")]
    NoConvergence {
        iterations: usize,
        quantity: &'static str,
        value: f64,
    },

    /// Run configuration rejected by schema or semantic validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
