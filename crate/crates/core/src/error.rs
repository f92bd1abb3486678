use alloc::string::String;

/// Errors raised by the stochastic-approximation toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LsaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("probabilities do not form a distribution: {0}")]
    NotADistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is numerically singular (condition number {0:e})")]
    Singular(f64),

    #[error("not positive definite (lambda_min of the symmetric part = {0:e}); apply a transform first")]
    NotPositiveDefinite(f64),

    #[error("not Hurwitz: smallest real part of the spectrum is {0:e}")]
    NotHurwitz(f64),

    #[error("transform failed: {0}")]
    TransformFailed(String),

    #[error("outside certified regime: rho_d = {rho_d:e}, rho_s = {rho_s:e}")]
    OutsideCertifiedRegime { rho_d: f64, rho_s: f64 },

    #[error("no stable step-size found (alpha fell below {0:e})")]
    NoStableStepSize(f64),
}

pub type Result<T, E = LsaError> = core::result::Result<T, E>;
