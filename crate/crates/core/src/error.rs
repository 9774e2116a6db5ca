use thiserror::Error;

/// Errors raised by kernels, solvers, estimators and experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition of a solver or problem does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The time stepping produced a NaN or an infinity.
    #[error("integration failure at step {step}: non-finite value {value}")]
    NonFinite { step: usize, value: f64 },

    /// The experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that come from bad input rather than a failed run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::Config(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
