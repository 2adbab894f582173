use thiserror::Error;

/// Errors raised anywhere in the sensitivity pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// A bound was requested outside the separation regime where it holds.
    #[error("precondition violated: delta = {delta} must exceed threshold {threshold}")]
    Precondition { delta: f64, threshold: f64 },

    #[error("infeasible sampling request: {0}")]
    Infeasible(String),

    #[error("sampling timed out after {0} rejections")]
    SamplingTimeout(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
