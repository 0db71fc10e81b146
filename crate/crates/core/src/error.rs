use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid shape sample: {0}")]
    InvalidSample(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("grid resolution {got} below the minimum of {min} nodes per axis")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("discretization error: {0}")]
    Discretization(String),

    /// Offending node indices, truncated to the first few for display.
    #[error("graph is not spacelike at {} node(s), first: {:?}", .nodes.len(), &.nodes[..nodes.len().min(8)])]
    NotSpacelike { nodes: Vec<usize> },

    #[error("field has {got} values, grid has {expected} nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("eigensolver failure: {0}")]
    Eigensolve(String),
}
