use thiserror::Error;

/// Errors produced by the simulator and its diagnostics.
#[derive(Debug, Error)]
pub enum FeneError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "basis ill-conditioned: Gram deviation {deviation:.3e} exceeds tolerance {tol:.1e} \
         (try a lower degree or a finer quadrature)"
    )]
    IllConditioned { deviation: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mass violation at point {point}: coefficient 0 is {value:e}")]
    MassViolation { point: usize, value: f64 },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("CFL violation: dt = {dt:e} exceeds the advective bound, suggested dt = {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("instability at t = {t}: energy grew from {before:e} to {after:e}")]
    Instability { t: f64, before: f64, after: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("mechanism violation: {0}")]
    Mechanism(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeneError>;
