use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary decay violated: boundary/max = {ratio:.3e} > {limit:.1e}; truncation error would dominate")]
    BoundaryDecay { ratio: f64, limit: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("CFL violation: dt = {dt:.3e} needs {needed} drift substeps, limit {limit}")]
    Cfl { dt: f64, needed: usize, limit: usize },
    #[error("non-finite value at t = {t:.6e}, node {node}")]
    NonFinite { t: f64, node: usize },
    #[error("mass drift {drift:.3e} exceeds {limit:.1e}")]
    MassDrift { drift: f64, limit: f64 },
    #[error("grid too large for dense assembly: {size} unknowns (limit {limit})")]
    Oversized { size: usize, limit: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("nonpositive values: {0}")]
    NonPositive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
