use thiserror::Error;

use crate::mdp::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),
    #[error("invalid BMDP: {0}")]
    InvalidBmdp(ValidationReport),
    #[error("invalid factored MDP: {0}")]
    InvalidFactored(String),
    #[error("tolerance must be positive (got {0})")]
    NonPositiveTolerance(f64),
    #[error("iteration did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("infeasible interval row: sum of lower bounds {sum_lo}, sum of upper bounds {sum_hi}")]
    InfeasibleRow { sum_lo: f64, sum_hi: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("epsilon {0} out of range")]
    EpsilonOutOfRange(f64),
    #[error("not a partition: {0}")]
    NotAPartition(String),
    #[error("{n} variables exceeds the expansion limit of {max}")]
    TooManyVariables { n: usize, max: usize },
    #[error("{n} states exceeds the limit of {max}")]
    TooManyStates { n: usize, max: usize },
    #[error("symbolic budget exceeded: more than {cap} regions")]
    SymbolicBudgetExceeded { cap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}
