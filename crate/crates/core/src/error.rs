use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid diffeomorphism: {0}")]
    InvalidDiffeomorphism(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ellipticity violated at node {node}: {detail}")]
    Ellipticity { node: usize, detail: String },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("under-resolved frequency: N = {n}, N|xi|h = {product:.4} > pi/4")]
    Aliasing { n: f64, product: f64 },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("unstable time step: dt = {dt:e} exceeds bound {bound:e}")]
    UnstableTimeStep { dt: f64, bound: f64 },

    #[error("non-smooth field derivatives detected: {0}")]
    NonSmooth(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
