use thiserror::Error;

use crate::steady::FixedPointReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular kernel: {0}")]
    InvalidKernel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("grid mismatch: {0}")]
    Shape(String),

    #[error("argument {r} outside interpolation range [0, {r_max}]")]
    Range { r: f64, r_max: f64 },

    #[error("characteristic function has not decayed at r_max: |phi| = {tail:e} > {limit:e}")]
    Truncation { tail: f64, limit: f64 },

    #[error("GTW distance undefined: second moments differ by {gap:e} (limit {limit:e})")]
    MetricDomain { gap: f64, limit: f64 },

    #[error("moment fit ill-conditioned: residual {residual:e}")]
    IllConditioned { residual: f64 },

    #[error("contraction violated at iteration {iteration}: ratio {ratio} > lambda {lambda}")]
    ContractionViolation {
        iteration: usize,
        ratio: f64,
        lambda: f64,
    },

    #[error("fixed-point iteration did not converge in {} iterations (certified error {:e})", .0.iterations, .0.certified_error)]
    NotConverged(Box<FixedPointReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
