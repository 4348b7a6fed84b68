use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    InvalidArgument(String),
    /// The scoring service could not be reached after retries.
    BackendUnavailable(String),
    /// The scoring service answered with something that breaks the protocol.
    Protocol(String),
    /// A statistic is undefined for the given sample (e.g. all predictor values tied).
    UndefinedStatistic(String),
    /// A constructed value falls outside its declared range.
    Range(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::BackendUnavailable(m) => write!(f, "backend unavailable: {m}"),
            Error::Protocol(m) => write!(f, "protocol error: {m}"),
            Error::UndefinedStatistic(m) => write!(f, "undefined statistic: {m}"),
            Error::Range(m) => write!(f, "value out of range: {m}"),
        }
    }
}

impl core::error::Error for Error {}
