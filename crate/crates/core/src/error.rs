use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: i64, hi: i64 },
    #[error("non-generic parameter: {0}")]
    NonGenericParameter(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("consistency zero violated at level {level}, k = {k}: {value:e}")]
    Consistency { level: usize, k: usize, value: f64 },
    #[error("diagonal cutoff exceeded: requested {requested}, exact up to {available}")]
    CutoffExceeded { requested: i64, available: i64 },
    #[error("lambda must be nonzero")]
    ZeroLambda,
    #[error("parse: {0}")]
    Parse(String),
    #[error("tolerance: {0}")]
    Tolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
