//! Error type shared across the solver library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix must be square, got {n_rows}x{n_cols}")]
    NotSquare { n_rows: usize, n_cols: usize },

    #[error("invalid matrix structure: {0}")]
    InvalidMatrix(String),

    #[error("value {value:e} overflows the single-precision range")]
    Overflow { value: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("row {row} has no diagonal entry in the sparsity pattern")]
    MissingDiagonal { row: usize },

    #[error("zero pivot encountered at row {row}")]
    ZeroPivot { row: usize },

    #[error("backward error undefined: matrix, solution, and right-hand side are all zero")]
    ZeroDenominator,

    #[error("Givens rotation undefined for the zero pair")]
    GivensUndefined,

    #[error("triangular solve hit a zero diagonal at index {index}")]
    SingularTriangular { index: usize },

    #[error("orthogonality-loss policy requires an S-matrix monitor")]
    MonitorRequired,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot parse restart policy '{0}'")]
    PolicyParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
