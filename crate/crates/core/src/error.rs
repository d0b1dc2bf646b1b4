use std::io;

use thiserror::Error;

/// Errors produced while loading data, building indexes or answering queries.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },

    #[error("{kind} ids must be dense in [0, {count}); id {missing} is missing")]
    SparseIds {
        kind: &'static str,
        count: usize,
        missing: u64,
    },

    #[error("edge {edge} references unknown node {node}")]
    DanglingNode { edge: u32, node: u64 },

    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: u32, node: u32 },

    #[error("edge {edge} has non-positive or non-finite weight {weight}")]
    InvalidWeight { edge: u32, weight: f64 },

    #[error("road network is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("road network is empty")]
    EmptyNetwork,

    #[error("unknown edge {0}")]
    UnknownEdge(u32),

    #[error("offset {offset} is outside [0, {weight}] on edge {edge}")]
    OffsetOutOfRange { edge: u32, offset: f64, weight: f64 },

    #[error("object {0} has an empty visual descriptor")]
    EmptyObjectDescriptor(u64),

    #[error("query descriptor is empty")]
    EmptyQueryDescriptor,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("unsupported index format: {0}")]
    Version(String),

    #[error("index checksum mismatch")]
    Checksum,

    #[error("index is corrupt: {0}")]
    Corrupt(String),

    #[error("workload was generated for network {workload}, index holds network {index}")]
    WorkloadMismatch { workload: String, index: String },

    #[error("oracle check failed: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input, as opposed
    /// to I/O failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
