use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Model(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("enumeration budget exceeded: {needed} assignments needed, budget is {budget}")]
    Budget { needed: u128, budget: u64 },
    #[error("infeasible boundary: {0}")]
    Infeasible(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("variable {0} is not covered by the assignment")]
    Uncovered(u32),
}

pub type Result<T> = std::result::Result<T, Error>;
