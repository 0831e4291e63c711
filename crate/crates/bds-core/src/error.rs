//! Crate-wide error type.

use thiserror::Error;

/// Incumbent carried out of an interrupted extrapolation so the caller can
/// finalize its trace with the best point found before the budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct CarriedBest {
    pub x: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub f_tilde: f64,
    pub alpha: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    /// The evaluation budget is spent. `carried` is populated when the
    /// budget ran out mid-extrapolation and a better point than the poll
    /// success had already been accepted.
    #[error("upper-level evaluation budget exhausted")]
    BudgetExhausted { carried: Option<CarriedBest> },

    #[error("non-finite value from {context} at x = {x:?}")]
    NonFiniteValue { context: &'static str, x: Vec<f64> },

    #[error("missing problem metadata: {0}")]
    MissingMetadata(&'static str),

    #[error("problem has no analytic lower-level solution")]
    MissingAnalyticLower,

    #[error("empty direction set")]
    EmptyDirectionSet,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh membership is only decidable for the default basis")]
    UnsupportedMesh,

    #[error("could not generate a nonzero mesh direction after {0} attempts")]
    DegenerateDirection(usize),

    #[error("unknown problem id: {0}")]
    UnknownProblem(String),

    #[error("unknown solver id: {0}")]
    UnknownSolver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed trace file: {0}")]
    MalformedTrace(String),
}

impl Error {
    pub fn budget() -> Self {
        Error::BudgetExhausted { carried: None }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
