use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures of the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("steady-state iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("eigenvalue solver failed on the drift matrix")]
    EigenFailure,

    #[error("iω + A is singular at ω = {omega}")]
    SingularMatrix { omega: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("linear model is not stable (margin {margin:e})")]
    Unstable { margin: f64 },

    #[error("quadrature did not reach tolerance: error estimate {estimate:e} > target {target:e} after {subdivisions} subdivisions")]
    ToleranceNotMet {
        estimate: f64,
        target: f64,
        subdivisions: usize,
    },

    #[error("covariance matrix is not physical: {0}")]
    NonPhysical(String),

    #[error("teleportation matrix Γ has non-positive determinant {0:e}")]
    NonPositiveGamma(f64),

    #[error("conditioning block of the covariance matrix is singular")]
    SingularBlock,

    #[error("every point of the gain grid is unstable")]
    NoStableRegion,

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by an unstable or marginal operating point.
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. } | Error::SingularMatrix { .. } | Error::NoStableRegion
        )
    }
}
