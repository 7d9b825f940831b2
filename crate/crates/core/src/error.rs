//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear algebra backend error: {0}")]
    Backend(#[from] ndarray_linalg::error::LinalgError),

    #[error("decomposition did not converge: {0}")]
    NonConvergence(String),

    #[error("trajectory blow-up at t = {time}: non-finite state")]
    BlowUp { time: f64 },

    #[error("degenerate scaling: component {component} is constant")]
    DegenerateScaling { component: usize },

    #[error("alternating solve produced a non-finite residue at iteration {iteration}; log so far: {log:?}")]
    DivergedIteration { iteration: usize, log: Vec<f64> },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
