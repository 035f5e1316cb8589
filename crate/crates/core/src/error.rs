//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, StereoError>;

/// Everything that can go wrong while generating, perturbing, fitting or
/// mitigating.
#[derive(Debug, Error)]
pub enum StereoError {
    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The shape of the inputs does not fit the operation (dimension
    /// mismatch, empty group, missing column).
    #[error("structural error: {0}")]
    Structural(String),

    /// A probability hit the numeric floor, or the distribution has
    /// collapsed onto a single type.
    #[error("saturated distribution at type {type_value}: {reason}")]
    Saturation {
        /// Value of the offending type.
        type_value: f64,
        /// What exactly saturated.
        reason: String,
    },

    /// The Gram matrix of a least-squares problem is not invertible.
    #[error("singular system: {0}")]
    Singular(String),

    /// A model could not be fitted on the supplied data.
    #[error("fit error: {0}")]
    Fit(String),

    /// No observed minority row is a feasible exemplar at the given radius.
    #[error("no feasible exemplar candidate within epsilon = {epsilon}")]
    NoCandidate {
        /// Radius of the equality ball that was tried.
        epsilon: f64,
    },

    /// The estimated pull strength is so close to one that the original
    /// points cannot be recovered.
    #[error("reconstruction impossible: estimated alpha {alpha_hat} is at the collapse limit")]
    Collapse {
        /// Estimated pull strength.
        alpha_hat: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StereoError {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Self::Parameter(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Self::Structural(msg.into())
    }
}
