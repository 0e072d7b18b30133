use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sites {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("site {index} lies outside the domain box")]
    PointOutsideDomain { index: usize },

    #[error("invalid index subset: {0}")]
    InvalidSubset(String),

    #[error("Matérn smoothness nu = {nu} has no evaluator in this build")]
    UnsupportedSmoothness { nu: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("footprint matrix of site {center} ({size} points) is not positive definite")]
    FootprintNotPositiveDefinite { center: usize, size: usize },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("zero diagonal entry in triangular factor at row {index}")]
    SingularDiagonal { index: usize },

    #[error("iteration stopped after {iterations} steps with relative residual {residual:e}")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },

    #[error("footprint radius degenerates: fill distance {fill_distance} must be below 1")]
    DegenerateRadius { fill_distance: f64 },

    #[error("moment matrix of cluster {node} is numerically rank deficient")]
    RankDeficientMoments { node: usize },

    #[error("operation requires the {expected} preconditioner variant")]
    WrongVariant { expected: &'static str },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
