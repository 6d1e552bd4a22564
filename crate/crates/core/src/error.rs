use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integer overflow while computing {0}")]
    Overflow(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("degree error: {what} has degree {degree}, which exceeds the relaxation order k = {k}")]
    Degree {
        what: String,
        degree: usize,
        k: usize,
    },

    #[error("grid of {required} points exceeds the budget of {budget} points")]
    GridBudget { required: u128, budget: u128 },

    #[error("feasible set is empty: every branch was certified infeasible at order k = {k}")]
    GloballyInfeasible { k: usize },

    #[error("SDP solver failure on box {box_desc}: {status}")]
    Solver { box_desc: String, status: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
