use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Omega forms are undefined for equal speeds (m1 = m2); use the Gamma forms")]
    UndefinedForEqualSpeeds,

    #[error("exponent is infinite for this configuration ({0})")]
    InfiniteExponent(String),

    #[error("value {value} outside valid range: {reason}")]
    OutsideValidRange { value: f64, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain radius {actual} too small: need at least {required}")]
    DomainTooSmall { required: f64, actual: f64 },

    #[error("numerical divergence at t = {t}: {reason}")]
    Diverged { t: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
