use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("column {0} is identically zero")]
    ZeroColumn(usize),

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("sampled gram matrix has a vanishing diagonal at column {column} (value {value:e})")]
    DegenerateGram { column: usize, value: f64 },

    #[error("zero pivot at row {0} during Gauss-Seidel sweep")]
    ZeroPivot(usize),

    #[error("conjugate gradient breakdown at iteration {iteration}: p'A'Ap = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("rank deficient: pivot {pivot:e} at column {column}")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("symmetric eigensolve did not converge")]
    EigenFailure,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
