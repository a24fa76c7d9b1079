use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: NodeId, dst: NodeId },

    #[error("node id {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: u64, n: usize },

    #[error("model mismatch: operation requires {expected}, instance is {found}")]
    ModelMismatch { expected: &'static str, found: &'static str },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
