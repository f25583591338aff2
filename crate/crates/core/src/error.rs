use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("density validation failed: {0}")]
    Validation(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("function is outside the domain of T_m: {0}")]
    DomainViolation(String),

    #[error("grid cannot resolve the multiplier: {0}")]
    GridResolution(String),

    #[error("matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("Hermite degree {0} exceeds the supported maximum of 64")]
    HermiteOverflow(usize),

    #[error("Wick polynomials live in different directions: {0}")]
    DirectionMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integrand grows too fast for Gauss-Hermite nodes: {0}")]
    Growth(String),

    #[error("missing ensemble column: {0}")]
    MissingColumn(String),

    #[error("integrability check failed: {0}")]
    Integrability(String),

    #[error("derivative of the variance function is unstable at t = {t}: {detail}")]
    DerivativeInstability { t: f64, detail: String },

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
