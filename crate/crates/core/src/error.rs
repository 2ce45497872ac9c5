use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible meshes: {0}")]
    IncompatibleMesh(String),
    #[error("unknown cell index {0}")]
    UnknownCell(usize),
    #[error("input is discontinuous in {direction} (jump {jump:e} at {at})")]
    Discontinuous {
        direction: &'static str,
        at: f64,
        jump: f64,
    },
    #[error("input violates the zero spatial trace (|value| = {0:e})")]
    NonZeroTrace(f64),
    #[error("time mesh grading violated: neighbouring cell ratio {0} exceeds 2")]
    Grading(f64),
    #[error("unsupported degree: {0}")]
    UnsupportedDegree(String),
    #[error("ill-conditioned Gram matrix (condition number {0:e})")]
    IllConditioned(f64),
    #[error("evaluation of analytic field failed at (t, x) = ({0}, {1})")]
    Evaluation(f64, f64),
    #[error("{0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, Error>;
