use thiserror::Error;

#[derive(Debug, Error)]
pub enum MibpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
