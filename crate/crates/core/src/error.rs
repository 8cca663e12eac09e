use chrono::NaiveDate;
use thiserror::Error;

use crate::solvers::SolverStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid price {value} for {ticker} on {date}")]
    InvalidPrice {
        ticker: String,
        date: NaiveDate,
        value: f64,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("return kind mismatch: expected {expected}, got {got}")]
    KindMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("risk-free series does not cover {0}")]
    Coverage(NaiveDate),

    #[error("date alignment error: {0}")]
    Alignment(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite, even after ridge regularization")]
    SingularMatrix,

    #[error("frontier coefficients are degenerate (all means equal)")]
    DegenerateFrontier,

    #[error("tangency portfolio is undefined: {0}")]
    TangencyUndefined(String),

    #[error("constraint set is infeasible")]
    Infeasible,

    #[error("solver stopped with status {0:?}")]
    Solver(SolverStatus),

    #[error("ratio is undefined: {0}")]
    UndefinedRatio(String),

    #[error("tail has {available} positive observations, need at least {needed}")]
    InsufficientTail { needed: usize, available: usize },

    #[error("degenerate tail estimate: the tail order statistics have no spread")]
    DegenerateEstimate,
}
