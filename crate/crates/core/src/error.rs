use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}D grid, found {found}D")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid too small for the {method} operator: {points} points on axis {axis}")]
    GridTooSmall {
        method: &'static str,
        axis: usize,
        points: usize,
    },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("expression evaluates to a non-finite value at x={x}, y={y}, z={z}, t={t}")]
    NonFiniteSample { x: f64, y: f64, z: f64, t: f64 },

    #[error("time-dependent potential unsupported: {0}")]
    TimeDependentPotential(String),

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("incompatible right-hand side: component {component:e} along a zero mode")]
    IncompatibleRhs { component: f64 },

    #[error("gauge function is not in the kernel of the wave operator: residual {residual:e} > {tolerance:e}")]
    NotInKernel { residual: f64, tolerance: f64 },

    #[error("magnetic field is not solenoidal: divergence {divergence:e}")]
    NonSolenoidal { divergence: f64 },

    #[error("magnetic field has nonzero mean {mean:e}; no periodic vector potential exists")]
    NonzeroMean { mean: f64 },

    #[error("grid of {size} points too large for dense diagonalization (limit {limit})")]
    GridTooLarge { size: usize, limit: usize },

    #[error("sources violate the continuity equation at t={t}: residual {residual:e} (scale {scale:e})")]
    ContinuityViolation { t: f64, residual: f64, scale: f64 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
