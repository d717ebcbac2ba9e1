use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { what: &'static str, iterations: usize, residual: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("assumption `{assumption}` violated (residual {residual:e})")]
    AssumptionFailed { assumption: &'static str, residual: f64 },

    #[error("grid flavor mismatch: {0}")]
    FlavorMismatch(String),

    #[error("linear system is not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),
}
