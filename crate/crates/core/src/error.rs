use thiserror::Error;

/// Errors raised anywhere in the planning pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("algebra too large: {s} basis elements exceeds cap {cap}")]
    Size { s: u64, cap: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported nilpotency order {k} (max {max})")]
    UnsupportedOrder { k: usize, max: usize },

    #[error(
        "exact synthesis unsupported for m={m}, k={k}; use approximate mode"
    )]
    UnsupportedConfiguration { m: usize, k: usize },

    #[error("state {state:?} outside validity domain of {what}")]
    Domain { what: String, state: Vec<f64> },

    #[error("non-finite state encountered at t={t}")]
    Divergence { t: f64 },

    #[error("Hall fields do not span the curve velocity at node {node} (residual {residual:e})")]
    RankDeficient { node: usize, residual: f64 },

    #[error("synthesized schedule does not reproduce its target (max residual {max_residual:e})")]
    Verification { max_residual: f64, residual: Vec<f64> },

    #[error("refinement did not converge after {} iterations; error history {history:?}", history.len())]
    Refinement { history: Vec<f64> },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
