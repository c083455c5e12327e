use thiserror::Error;

use crate::integrate::Trajectory;

pub type Result<T> = std::result::Result<T, DimerError>;

#[derive(Debug, Error)]
pub enum DimerError {
    #[error("state is not normalized (norm² = {norm_sqr:.3e})")]
    NotNormalized { norm_sqr: f64 },

    #[error("projection onto the zero-magnetization subspace is degenerate (residual {residual:.3e})")]
    DegenerateProjection { residual: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The adaptive integrator gave up; the partial trajectory is kept for inspection.
    #[error("integration did not converge: {reason} at t = {t_reached} after {steps} steps")]
    NonConvergence {
        reason: String,
        steps: usize,
        t_reached: f64,
        partial: Box<Trajectory>,
    },

    #[error("calibration failed for {kind}: residual {residual:.3e} exceeds {threshold:.1e}")]
    CalibrationFailure {
        kind: String,
        residual: f64,
        threshold: f64,
    },
}

impl DimerError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        DimerError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
