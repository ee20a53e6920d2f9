use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (sizes, index ranges, cones).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid construction parameters; the message names the violated inequality.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonlinearity constants have not been certified")]
    Uncertified,

    #[error("constant certification did not converge: {0}")]
    Certification(String),

    /// Non-finite values appeared while time stepping.
    #[error("integration failure at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("empty search grid: {0}")]
    EmptyGrid(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
