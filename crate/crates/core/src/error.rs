use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent p = {0} is out of range (need p > 1)")]
    ExponentOutOfRange(f64),

    #[error("profile shooting did not converge: {0}")]
    NoConvergence(String),

    #[error("core radius equation has no root in (0, R): {0}")]
    NoRoot(String),

    #[error("radius {radius} lies outside the enclosing ball of radius {r_enclosing}")]
    OutOfBall { radius: f64, r_enclosing: f64 },

    #[error("grid too coarse: {0}")]
    TooCoarse(String),

    #[error("source ({x}, {y}) is within {distance:.3e} of the boundary (minimum {minimum:.3e})")]
    SourceNearBoundary {
        x: f64,
        y: f64,
        distance: f64,
        minimum: f64,
    },

    #[error("strength system is nearly singular (diagonal dominance margin {margin:.3e})")]
    NearSingularSystem { margin: f64 },

    #[error("strength {index} is nonpositive ({value:.6e})")]
    NonpositiveStrength { index: usize, value: f64 },

    #[error("inadmissible vortex configuration: {0}")]
    Inadmissible(String),

    #[error("newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },

    #[error("newton iteration collapsed onto the trivial branch w = 0 after {iterations} iterations")]
    FellToTrivial { iterations: usize },

    #[error("positivity set is empty")]
    EmptyCore,

    #[error("optimizer stopped on the boundary of the search region at ({x:.6}, {y:.6})")]
    ExtremumOnRegionBoundary { x: f64, y: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid background fields: {0}")]
    Validation(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
