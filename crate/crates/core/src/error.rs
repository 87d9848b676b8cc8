use thiserror::Error;

/// Errors raised by the numerical modules and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or call parameter violates a precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Evaluation too close to a point where the group velocity vanishes.
    #[error("k = {k} lies in the singular zone (|omega'(k)| = {omega_prime:e})")]
    SingularZone { k: f64, omega_prime: f64 },

    /// Requested time lies past the precomputed kernel horizon.
    #[error("t = {t} exceeds the kernel horizon {horizon}; rebuild the memory kernel with a longer horizon")]
    Range { t: f64, horizon: f64 },

    /// A table or kernel invariant failed after construction.
    #[error("invariant `{name}` violated at k = {k}: residual {residual:e}")]
    Invariant {
        name: &'static str,
        k: f64,
        residual: f64,
    },

    /// The coupling kernel fails validation.
    #[error("invalid coupling kernel: {0}")]
    Kernel(String),

    /// The deterministic mild-solution route only handles zero temperature.
    #[error("unsupported branch: {0}")]
    UnsupportedBranch(String),

    /// A simulation finished but its fidelity checks failed.
    #[error("invalid run: {0}")]
    InvalidRun(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
