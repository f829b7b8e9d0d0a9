use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `log f(x^m)` is infinite because `f` vanishes at `x^m`.
    #[error("f vanishes at x^{m}; log is infinite")]
    InfiniteValue { m: usize },

    /// The circle function violates the root-of-unity zero hypothesis, or a
    /// rational point hits one of its zeros.
    #[error("f vanishes at s = {s}; log is infinite")]
    ZeroOnCircle { s: f64 },

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("quadrature did not converge on panel [{lo}, {hi}] (error estimate {error:e})")]
    Quadrature { lo: f64, hi: f64, error: f64 },

    #[error("precondition violated at m = {m}: {reason}")]
    Precondition { m: usize, reason: String },

    #[error("covariance matrix is singular (gram determinant {determinant:e})")]
    SingularCovariance { determinant: f64 },

    #[error("refused: {0}")]
    Refused(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
