use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tangent vector of norm {norm} is beyond the cut-locus limit {limit}")]
    CutLocusViolation { norm: f64, limit: f64 },

    #[error("tangent vector is not based at the given point")]
    BaseMismatch,

    #[error("point is not on the unit sphere (norm {0})")]
    NotUnit(f64),

    #[error("vector is not tangent at its base point (inner product {0})")]
    NotTangent(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate distance {0} for the half-squared-distance Hessian")]
    DegenerateDistance(f64),

    #[error("coincident points in the Green's function")]
    CoincidentPoints,

    #[error("field is not smooth enough to differentiate: {0}")]
    NonSmoothField(String),

    #[error("operator is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("operator is not symmetric (asymmetry {0})")]
    NotSymmetric(f64),

    #[error("not a probability density: {0}")]
    NotADensity(String),

    #[error("argument {0} outside the domain [0, pi)")]
    DomainError(f64),

    #[error("solver did not converge after {iterations} iterations (residual {residual})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("support of size {size} exceeds the exact solver limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("dimension {0} is not supported here")]
    DimensionUnsupported(usize),

    #[error("potential is not c-concave (margin {0})")]
    NotCConcave(f64),

    #[error("curvature constant kappa = {0} is not positive")]
    KappaNonpositive(f64),

    #[error("geodesic speed {0} reaches a conjugate point")]
    ConjugatePoint(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
