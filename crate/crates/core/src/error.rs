use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("graph is not connected ({reached} of {total} nodes reachable from node 0)")]
    DisconnectedGraph { reached: usize, total: usize },
    #[error("objective matrix of node {node} is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetricQ { node: usize, asymmetry: f64 },
    #[error("objective matrix of node {node} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { node: usize, min_eigenvalue: f64 },
    #[error("duplicate edge between nodes {i} and {j}")]
    DuplicateEdge { i: usize, j: usize },
    #[error("edge ({i}, {j}) is a self loop")]
    SelfLoop { i: usize, j: usize },
    #[error("reference to unknown node {0}")]
    UnknownNode(usize),
    #[error("node ids must be 0..n-1 with no gaps or repeats: {0}")]
    InvalidNodeIds(String),
    #[error("problem file: {0}")]
    Parse(String),
    #[error("local system of node {node} is not positive definite under penalty c = {c}")]
    SingularSystem { node: usize, c: f64 },
    #[error("invalid schedule configuration: {0}")]
    InvalidConfig(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("oracle limit exceeded: {what} is {found}, limit {limit}")]
    TooManyRows {
        what: &'static str,
        found: usize,
        limit: usize,
    },
    #[error("oracle precondition violated: {0}")]
    OraclePrecondition(String),
    #[error("sensor cones have an empty intersection")]
    EmptyIntersection,
    #[error("scenario generation failed: {0}")]
    Generation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
