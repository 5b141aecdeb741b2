use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("group index {index} out of range for {groups} groups")]
    GroupOutOfRange { index: usize, groups: usize },

    /// A documented precondition of an operation was not met by the caller.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("secular equation did not converge after {iterations} iterations (best r = {best_r}, |f(r)-1| = {residual:e})")]
    NumericalFailure {
        iterations: usize,
        best_r: f64,
        residual: f64,
    },

    #[error("group {group} has {size} columns; the signed solver accepts at most {limit}")]
    GroupTooLarge {
        group: usize,
        size: usize,
        limit: usize,
    },

    /// Every sign vector was rejected for a group whose zero check failed.
    /// Impossible in exact arithmetic, so this points at a tolerance problem.
    #[error("no feasible sign vector for group {group} after {tried} candidates")]
    InfeasibleSigns { group: usize, tried: usize },

    #[error("degenerate problem: {0}")]
    Degenerate(String),
}
