use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid group element encoding")]
    Decode,
    #[error("invalid scalar")]
    InvalidScalar,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("challenge rejected: {0}")]
    Rejected(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
