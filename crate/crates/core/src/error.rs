use thiserror::Error;

/// Errors produced by graph construction, routing and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid capacity on edge ({u}, {v}): {reason}")]
    InvalidCapacity { u: usize, v: usize, reason: String },

    #[error("self-edge at vertex {0}; self-loops are only introduced by lazification")]
    SelfEdge(usize),

    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("graph is disconnected")]
    Disconnected,

    #[error("random walk does not mix (lambda_bar = {0}); input is disconnected or bipartite without lazification")]
    NoMixing(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("invalid demand matrix: {0}")]
    InvalidDemand(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "LP budget exceeded: n = {n}, |E| = {edges} (limits n <= {max_n}, |E| <= {max_edges})"
    )]
    LpBudget {
        n: usize,
        edges: usize,
        max_n: usize,
        max_edges: usize,
    },

    #[error("LP solver failed: {0}")]
    Lp(String),

    #[error("trace does not match graph: {0}")]
    TraceMismatch(String),

    #[error("sample space exhausted: {0}")]
    SampleSpace(String),

    #[error("empty sample")]
    EmptySample,

    #[error("zero optimum with nonzero congestion {0}")]
    ZeroOptimum(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
