use thiserror::Error;

/// Errors produced by the model, solvers, simulator and sweeps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The credibility bound cannot be met by any threshold.
    #[error("credibility bound tau = {tau} is infeasible: {reason}")]
    Infeasible { tau: f64, reason: String },

    /// `beta = 0` puts all weight on the error; the infimum needs an unbounded wait.
    #[error("beta = 0 is degenerate: the error infimum is only approached as the wait grows without bound")]
    UnboundedWait,

    #[error("numerical routine `{routine}` did not converge: {detail}")]
    NonConvergence {
        routine: &'static str,
        detail: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_nonneg(name: &'static str, value: f64) -> Result<f64> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be nonnegative",
        });
    }
    Ok(value)
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        });
    }
    Ok(value)
}
