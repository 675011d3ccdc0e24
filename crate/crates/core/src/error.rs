use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },

    #[error("node {0} is not part of the tree")]
    NodeNotInTree(NodeId),

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),

    #[error("not a tree: {0}")]
    NotATree(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),

    #[error("no candidate source is consistent with the observations")]
    EmptyCandidateSet,

    #[error("need at least {required} active observers, got {found}")]
    InsufficientObservers { required: usize, found: usize },

    #[error("delay covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("active observers span more than one connected component")]
    ObserversDisconnected,

    #[error("config line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
