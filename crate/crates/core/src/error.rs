use thiserror::Error;

/// Errors raised by tree manipulation, cost evaluation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("node index must be >= 1, got {0}")]
    InvalidIndex(u64),

    #[error("malformed key tree: {0}")]
    MalformedTree(String),

    #[error("tree depth {0} exceeds the supported maximum")]
    TooDeep(u32),

    #[error("no full binary tree has height {height} and balance {balance}")]
    InfeasibleConfiguration { height: u32, balance: u32 },

    #[error("index {0} is not a leaf of the tree")]
    NotALeaf(u64),

    #[error("invalid rekey instance: {0}")]
    InvalidInstance(String),

    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point is outside the lifted feasible set: {0}")]
    OutsideFeasibleSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("simplex iteration limit reached")]
    LpIterationLimit,

    #[error("instance too large for exhaustive enumeration ({0} candidates)")]
    TooLarge(f64),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

pub type Result<T> = std::result::Result<T, Error>;
