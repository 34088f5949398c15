//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ray from {point:?} in direction {direction:?} never enters the domain")]
    RayMissesDomain { point: Vec<f64>, direction: Vec<f64> },

    #[error("point {point:?} is not on the domain boundary (distance {distance:.3e})")]
    AnchorOffBoundary { point: Vec<f64>, distance: f64 },

    #[error("anchor set is ill-conditioned: |delta| = {delta:.3e} <= tolerance {tolerance:.3e}")]
    IllConditionedAnchors { delta: f64, tolerance: f64 },

    #[error("all sampled anchor subsets are degenerate; domain is effectively lower-dimensional")]
    DegenerateAnchorCandidates,

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("direction undefined: point coincides with the anchor (r = {radius:.3e})")]
    DirectionUndefined { radius: f64 },

    #[error("domain is unbounded in direction {direction:?}")]
    UnboundedDomain { direction: Vec<f64> },

    #[error("interior point violates constraint {index} (slack {slack:.3e})")]
    NotInterior { index: usize, slack: f64 },

    #[error("quadratic form lost positivity: Re = {real:.3e}, Im = {imag:.3e}")]
    IndefiniteForm { real: f64, imag: f64 },

    #[error("linear solve failed: {0}")]
    SingularSolve(String),

    #[error("eigen-iteration did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    EigenNoConvergence { residual: f64, iterations: usize },

    #[error("ellipticity violated at {point:?}: Rayleigh quotient {value:.3e} < gamma {gamma:.3e}")]
    EllipticityViolation { point: Vec<f64>, value: f64, gamma: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
