use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was invoked on a state that lacks something it needs.
    #[error("state error: {0}")]
    State(String),

    /// A numerical kernel failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A field became non-finite during propagation.
    #[error("non-finite field: {0}")]
    NonFinite(String),

    /// An iterative solver ran out of iterations.
    #[error("iteration limit reached after {iterations} iterations (decrement {decrement:e})")]
    IterationLimit {
        iterations: usize,
        decrement: f64,
        /// Last iterate, one profile per component.
        last: Vec<Vec<f64>>,
    },

    /// Invalid configuration or command-line usage.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
