use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized (norm deficit {deficit:.3e})")]
    Unnormalized { deficit: f64 },

    #[error("truncation {truncation} too small: stationary tail mass {tail_mass:.3e} exceeds {limit:.1e}")]
    TruncationTooSmall {
        truncation: usize,
        tail_mass: f64,
        limit: f64,
    },

    #[error("linear solve failed: {0}")]
    SingularSolve(String),

    #[error("coherence decay is not exponential (log-fit residual {residual:.3e})")]
    NonExponentialDecay { residual: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:.3e})")]
    QuadratureNotConverged { a: f64, b: f64, estimate: f64 },

    #[error("lattice window captured mass {captured:.9} below required {required:.9}")]
    InsufficientWindow { captured: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}
