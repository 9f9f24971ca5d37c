use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement index must be at least {min}, got {got}")]
    Refinement { min: usize, got: usize },

    #[error("orientation {0:?} is not a unit vector (|v| - 1 = {1:e})")]
    NonUnit(Vec<f64>, f64),

    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),

    #[error("orientation of datum {datum:?} does not match mesh orientation {mesh:?}")]
    OrientationMismatch { datum: Vec<f64>, mesh: Vec<f64> },

    #[error("field has {got} cells, mesh has {expected}")]
    CellCount { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("missing problem data `{field}` for kind {kind}")]
    MissingData { kind: &'static str, field: &'static str },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex iteration limit reached ({0} pivots)")]
    IterationLimit(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
