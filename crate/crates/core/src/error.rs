use thiserror::Error;

/// Errors raised by meshing, assembly, the linear solvers and the minimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid refinement level {0}: must be at least 1")]
    InvalidLevel(usize),

    #[error("level {fine} is not a multiple of level {coarse}")]
    IncompatibleLevels { coarse: usize, fine: usize },

    #[error("field belongs to level {found}, expected level {expected}")]
    MeshMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("diffusion matrix on triangle {triangle} is not uniformly elliptic (smallest eigenvalue {min_eigenvalue:e})")]
    NotElliptic { triangle: usize, min_eigenvalue: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("line search denominator {0:e} is not positive")]
    NonPositiveCurvature(f64),

    #[error("boundary trace must be a nodal field with zero boundary mean (mean {0:e})")]
    NotZeroMean(f64),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidLevel(_) => "invalid_level",
            Error::IncompatibleLevels { .. } => "incompatible_levels",
            Error::MeshMismatch { .. } => "mesh_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotElliptic { .. } => "not_elliptic",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NonPositiveCurvature(_) => "non_positive_curvature",
            Error::NotZeroMean(_) => "not_zero_mean",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
