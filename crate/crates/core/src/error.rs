use thiserror::Error;

/// Errors raised by the library. CLI exit codes are derived from the variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value {value} at node ({:.6}, {:.6}, {:.6})", node[0], node[1], node[2])]
    NonFinite { value: f64, node: [f64; 3] },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("incompatible loads: {0}")]
    Incompatible(String),

    #[error("solver did not converge after {} iterations (last residual {:e})", residuals.len(), residuals.last().copied().unwrap_or(f64::NAN))]
    NotConverged { residuals: Vec<f64> },

    #[error("assembly check failed: {0}")]
    Assembly(String),

    #[error("energy diverged to {value:e}: {reason}")]
    Divergent { value: f64, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
