use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("series for {what} did not reach its certified tolerance before n = {ceiling}")]
    TruncationCeiling { what: String, ceiling: u64 },

    #[error("resource ceiling exceeded: {0}")]
    ResourceCeiling(String),

    #[error("cache file: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
