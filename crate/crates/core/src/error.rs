use crate::graph::{EdgeId, VertexId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("self-loop on vertex {0} is not allowed")]
    SelfLoop(VertexId),
    #[error("edge between {0} and {1} already exists")]
    DuplicateEdge(VertexId, VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("vertex id {0} was already used in this run")]
    VertexIdReused(VertexId),
    #[error("edge id {0} was already used in this run")]
    EdgeIdReused(EdgeId),
    #[error("line {line}: {message}")]
    MalformedEvent { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Internal consistency violation (coarsening preconditions, state layout).
    #[error("inconsistent structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI, grouped by failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MalformedEvent { .. } | Error::Json(_) => 3,
            Error::SelfLoop(_)
            | Error::DuplicateEdge(..)
            | Error::UnknownVertex(_)
            | Error::UnknownEdge(_)
            | Error::VertexIdReused(_)
            | Error::EdgeIdReused(_) => 4,
            Error::NonFinite(_) | Error::Structure(_) => 5,
            Error::Io(_) => 6,
        }
    }
}
