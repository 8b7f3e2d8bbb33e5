use thiserror::Error;

/// Errors raised by the discretisation and the time integrator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate geometry in element {element}: det(J) = {det:e} at quadrature point {point}")]
    Geometry {
        element: usize,
        point: usize,
        det: f64,
    },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("field lives in {found:?}, expected {expected:?}")]
    SpaceMismatch {
        expected: crate::Space,
        found: crate::Space,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
