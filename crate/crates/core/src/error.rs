use thiserror::Error;

/// Location of a node in a filtered space: time index and an outcome that
/// belongs to the offending block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Node {
    pub time: usize,
    pub outcome: usize,
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(n={}, outcome={})", self.time, self.outcome)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Range(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("contract violation at node {node}: {msg}")]
    ContractAt { node: Node, msg: String },

    #[error("singularity at node {node}: {msg}")]
    Singularity { node: Node, msg: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("construction consistency failure at node {node}: {msg}")]
    Construction { node: Node, msg: String },

    #[error("internal consistency failure at node {node}: {msg} (gap {gap:e})")]
    Consistency { node: Node, msg: String, gap: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn contract_at(time: usize, outcome: usize, msg: impl Into<String>) -> Error {
    Error::ContractAt {
        node: Node { time, outcome },
        msg: msg.into(),
    }
}

pub(crate) fn singular(time: usize, outcome: usize, msg: impl Into<String>) -> Error {
    Error::Singularity {
        node: Node { time, outcome },
        msg: msg.into(),
    }
}
