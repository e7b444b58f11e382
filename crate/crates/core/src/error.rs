use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    /// Smallest eigenvalue is not above `SPD_TOL` times the largest.
    #[error("matrix is not positive definite (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])")]
    NotSpd { min_eig: f64, max_eig: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    /// `I - Π₀ t` became numerically singular.
    #[error("singular factor at t = {t}")]
    SingularFactor { t: f64 },

    #[error("costate eigenvalue {max_eig} violates the bound < 1")]
    CostateBound { max_eig: f64 },

    #[error("path has no system matrices")]
    MissingSystemMatrices,

    #[error("grid has {points} points, at least {required} required")]
    GridTooCoarse { points: usize, required: usize },

    #[error("grid is not uniform")]
    NonUniformGrid,

    #[error("time {t} outside [0, 1] or not increasing")]
    InvalidTime { t: f64 },

    #[error("expected a positive value, got {value}")]
    NonPositiveInput { value: f64 },

    #[error("asymmetry weight epsilon must be non-zero")]
    EpsilonZero,

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },

    #[error("maximum number of steps exceeded at t = {t}")]
    MaxStepsExceeded { t: f64 },

    #[error("covariance lost positive definiteness at t = {t}")]
    SpdLost { t: f64 },

    #[error("solver did not converge (residual {residual:.3e})")]
    ConvergenceFailure { residual: f64 },

    #[error("continuation seed did not converge at epsilon = {epsilon} (residual {residual:.3e})")]
    SeedFailure { epsilon: f64, residual: f64 },

    #[error("every fit start failed")]
    AllStartsFailed,

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
