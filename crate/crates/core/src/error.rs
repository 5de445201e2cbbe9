use thiserror::Error;

/// Errors raised by the separation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched lengths, counts or sample rates.
    #[error("shape error: {0}")]
    Shape(String),
    /// Invalid parameters or missing run-time inputs.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    /// A non-finite value appeared while integrating the sampler ODE.
    #[error("numerical divergence at integration step {step}")]
    NumericalDivergence { step: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than by the computation itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Shape(_) | Error::Config(_) | Error::Parse(_) | Error::UnsupportedFormat(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
