use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvsiError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Mibp(#[from] mibp::MibpError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvsiError>;

pub(crate) fn domain(msg: impl Into<String>) -> EvsiError {
    EvsiError::Domain(msg.into())
}
