use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("q = {0} exceeds the enumeration cap of 15 nodes")]
    QTooLarge(usize),

    #[error("adjustment vector must start with an intercept entry of 1, found {0}")]
    MissingIntercept(f64),

    #[error("outcome entries must be 0 or 1")]
    NonBinaryOutcome,

    #[error("all configuration log-weights are -inf")]
    NumericalUnderflow,

    #[error("surrogate for node {node} is degenerate: {reason}")]
    DegenerateSurrogate { node: usize, reason: &'static str },

    #[error("labeled sample is empty")]
    EmptyLabeled,

    #[error("unlabeled sample is empty")]
    EmptyUnlabeled,

    #[error("influence covariance is singular")]
    SingularCovariance,

    #[error("mechanism and coefficient matrix are incompatible: {0}")]
    InvalidMechanism(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{failed} of {total} replications failed (first failure: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_node(self, node: usize) -> Self {
        match self {
            e @ Error::Node { .. } => e,
            other => Error::Node {
                node,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with node annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Node { source, .. } => source.root(),
            other => other,
        }
    }
}
