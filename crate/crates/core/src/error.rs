use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum IcddError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("obstacle edges do not align with grid lines: {0}")]
    MisalignedObstacle(String),
    #[error("coordinate {value} is not on a grid line (nearest {nearest}, tolerance {tol})")]
    OffGrid { value: f64, nearest: f64, tol: f64 },
    #[error("interfaces must be disjoint: {0}")]
    InterfacesNotDisjoint(String),
    #[error("singular system{}", pivot.map(|p| format!(" (pivot {p})")).unwrap_or_default())]
    Singular { pivot: Option<usize> },
    #[error("Krylov breakdown after {iterations} iterations")]
    Breakdown { iterations: usize },
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("boundary tag without a condition: {0}")]
    UnmatchedBoundary(String),
    #[error("meshes are not conformal: {0}")]
    NonConformal(String),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, IcddError>;
