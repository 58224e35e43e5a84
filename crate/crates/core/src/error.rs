use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("mode index {index} exceeds the supported cap |m| <= {cap}")]
    IndexOverflow { index: i64, cap: i32 },

    #[error("quadrature did not converge at order {order}: last estimates {previous:e} and {last:e}")]
    Accuracy { previous: f64, last: f64, order: usize },

    #[error("convolution step {step} is coarser than the allowed {limit}; increase the number of sub-steps")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {step} violates step * max(|r|, |chi|, 1) <= {bound}")]
    StepTooLarge { step: f64, bound: f64 },

    #[error("operation requires stage {expected}, state is in stage {found}")]
    WrongStage { expected: &'static str, found: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty search range: {0}")]
    EmptyRange(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
