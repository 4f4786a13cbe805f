use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Exit code family used by the command line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Invalid(_) => 3,
            Error::Precondition(_) => 4,
            Error::Construction(_) => 5,
            Error::Io(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}

pub(crate) fn construction<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Construction(msg.into()))
}
