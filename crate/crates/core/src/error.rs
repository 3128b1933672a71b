use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// The distance transform was asked to run on a grid with no occupied cell.
    #[error("grid has no occupied cell")]
    AllFree,

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("parameter {value} outside spline domain [{min}, {max}]")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("no collision-free path from {start:?} to {goal:?}")]
    NoPath { start: [f64; 3], goal: [f64; 3] },

    #[error("integration diverged at t = {t:.3} s")]
    Divergence { t: f64 },

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
