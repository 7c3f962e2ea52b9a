use thiserror::Error;

/// Errors raised by measure functionals, rate functions and the sampler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation,
    /// e.g. `t >= M` for an exponential-moment integral.
    #[error("domain error: {0}")]
    Domain(String),

    /// A deviation or probability level lies outside the range where a
    /// bound is valid.
    #[error("range error: {message} (validity supremum {validity_sup})")]
    Range { message: String, validity_sup: f64 },

    /// A quadrature, inversion or cross-check failed to reach tolerance.
    #[error("numeric error: {message} (achieved {achieved:e})")]
    Numeric { message: String, achieved: f64 },

    /// Invalid or missing configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The request is well-formed but not supported by this library.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            achieved,
        }
    }

    pub(crate) fn range(msg: impl Into<String>, validity_sup: f64) -> Self {
        Error::Range {
            message: msg.into(),
            validity_sup,
        }
    }

    /// True for errors a caller should report as a configuration problem
    /// (exit code 2 in the CLI).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Unsupported(_) | Error::Domain(_))
    }
}
