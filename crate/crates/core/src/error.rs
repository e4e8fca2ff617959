use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unstable trap: {0}")]
    UnstableTrap(String),

    #[error("ions {i} and {j} are closer than the minimum separation ({separation:e} < {minimum:e}, scaled units)")]
    CoincidentIons {
        i: usize,
        j: usize,
        separation: f64,
        minimum: f64,
    },

    #[error("minimizer did not converge after {iterations} iterations (force norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("converged point is not a minimum: smallest planar Hessian eigenvalue {min_eigenvalue:e}")]
    SaddleDetected { min_eigenvalue: f64 },

    #[error("{matrix} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        matrix: &'static str,
        min_eigenvalue: f64,
    },

    #[error("Cholesky factorization of the energy matrix failed")]
    FactorizationFailure,

    #[error("imaginary frequency: {0}")]
    ImaginaryFrequency(String),

    #[error("time step {dt:e} s exceeds the stability bound {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("non-finite coordinate at t = {time:e} s")]
    NumericalBlowup { time: f64 },

    #[error("trajectories do not share a sampling grid: {0}")]
    GridMismatch(String),

    #[error("trajectory duration {actual:e} s does not match the pulse sequence length {expected:e} s")]
    DurationMismatch { expected: f64, actual: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
