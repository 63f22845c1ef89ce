use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("workload is empty")]
    EmptyWorkload,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("arm is not indexable: {0}")]
    NotIndexable(String),

    #[error("joint state space has {states} states, limit is {limit}")]
    JointTooLarge { states: usize, limit: usize },

    #[error("no records to summarize")]
    EmptyRecords,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
