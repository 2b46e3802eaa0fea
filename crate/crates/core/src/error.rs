use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid CSR matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("singular matrix: pivot {pivot:e} at column {column} below threshold {threshold:e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("row {row} has zero absolute row sum; SIMPLEC lumping is inapplicable")]
    ZeroRowSum { row: usize },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid field partition: {0}")]
    InvalidPartition(String),

    #[error("diagonal block ({field},{field}) is absent; block Gauss-Seidel needs every diagonal block (use SIMPLE for saddle-point systems)")]
    AbsentDiagonalBlock { field: usize },

    #[error("GMRES breakdown at iteration {iteration} with relative residual {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },

    #[error("non-finite value encountered in Arnoldi vector at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("{path}: {error}")]
    Precond { path: String, error: Box<Error> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps `self` with the location of a preconditioner tree node.
    pub fn at(self, path: &str) -> Error {
        match self {
            // keep the innermost path, it is the most specific
            e @ Error::Precond { .. } => e,
            other => Error::Precond {
                path: path.to_string(),
                error: Box::new(other),
            },
        }
    }
}
