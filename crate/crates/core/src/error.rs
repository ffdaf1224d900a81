use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not star-shaped: rho = {min_rho:.3e} at theta = {theta:.4}")]
    NotStarShaped { min_rho: f64, theta: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("grid mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("annulus boundaries intersect or touch (gap {gap:.3e})")]
    AnnulusOverlap { gap: f64 },
    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:.3e}, condition estimate {condition:.3e}")]
    Solver { iterations: usize, residual: f64, condition: f64 },
    #[error("not in the range of the Dirichlet-Neumann operator: mean {mean:.3e}")]
    NotInRange { mean: f64 },
    #[error("missing acceleration field")]
    MissingAcceleration,
    #[error("domain mismatch between fields")]
    DomainMismatch,
    #[error("inconsistent flow family: normal speed mismatch {0:.3e}")]
    InconsistentFamily(f64),
    #[error("unresolved data: tail fraction {0:.3e}")]
    Unresolved(f64),
    #[error("annulus collapse: r1^2 = {0:.3e}")]
    Collapse(f64),
    #[error("star-shape violation at t = {t:.6}")]
    StarShapeViolation { t: f64 },
    #[error("non-finite value at t = {t:.6}")]
    NonFinite { t: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("Rayleigh-Taylor condition violated: margin {margin:.3e} at t = {t:.4}")]
    RtViolation { margin: f64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
