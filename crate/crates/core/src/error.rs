use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("non-finite value in {context} at {coords:?}")]
    NumericalFailure {
        context: &'static str,
        coords: Vec<f64>,
    },

    #[error("node {index:?} lies outside a grid with counts {counts:?}")]
    IndexError {
        index: Vec<usize>,
        counts: Vec<usize>,
    },

    #[error("singular matrix: pivot {pivot:e} at or below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("base points differ by {gap:e}")]
    BasePointMismatch { gap: f64 },

    #[error("invalid grid: {0}")]
    GridError(String),

    #[error(
        "Newton iteration stopped after {iterations} iterations with residual {residual:e}; \
         the Lagrangian is not G-regular near this jet"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error(
        "momentum constraints are inconsistent: mixed-partial gap {gap:e} exceeds {tolerance:e}"
    )]
    InconsistentConstraints { gap: f64, tolerance: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = core::result::Result<T, Error>;
