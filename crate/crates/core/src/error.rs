use thiserror::Error;

/// Errors raised while validating, solving, counting, or checking a problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),

    #[error("negative or non-finite value {value} in {context}")]
    NegativeValue { context: String, value: f64 },

    #[error("index {index} out of range for {context} (limit {limit})")]
    IndexOutOfRange {
        context: String,
        index: usize,
        limit: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("infeasible sum: target {target} exceeds bound total {bound_total}")]
    InfeasibleSum { target: f64, bound_total: f64 },

    #[error("consistency violation for index set {indices:?}: {lhs} is not below {rhs}")]
    ConsistencyViolation {
        indices: Vec<usize>,
        lhs: f64,
        rhs: f64,
    },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("multiplier {value} of row {index} exceeds 1")]
    MultiplierOutOfRange { index: usize, value: f64 },

    #[error("slice {slice}: {source}")]
    Slice { slice: usize, source: Box<Error> },

    #[error("unsupported constraint pattern: {0}")]
    Unsupported(String),

    #[error("not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    #[error("search space of about {estimate:e} matrices exceeds the limit {limit:e}")]
    SearchSpaceTooLarge { estimate: f64, limit: f64 },

    #[error("negative entry {0}")]
    NegativeEntry(f64),

    #[error("entry {0} is not an integer")]
    NonIntegerEntry(f64),
}

impl Error {
    pub(crate) fn in_slice(self, slice: usize) -> Error {
        Error::Slice {
            slice,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
