use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} outside domain [{a}, {b}]")]
    Domain { t: f64, a: f64, b: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("accuracy not reached: {0}")]
    Accuracy(String),
    #[error("solution diverged: {0}")]
    Divergence(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("billiard geometry: {0}")]
    Geometry(String),
    #[error("not enough samples for {what}: need {needed}, got {got}")]
    Statistics {
        what: String,
        needed: usize,
        got: usize,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
