use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain is degenerate: {0}")]
    DegenerateDomain(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("rejection sampler starved at vertex {vertex} after {steps} steps")]
    Starvation { vertex: usize, steps: u64 },

    #[error("replica {replica} failed: {message}")]
    Replica { replica: u64, message: String },

    #[error("no cluster with id {0}")]
    UnknownCluster(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
