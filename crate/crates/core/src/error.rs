use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient law: {0}")]
    InvalidLaw(String),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("angles are not the uniform grid πα/N (first mismatch at index {index})")]
    NonUniformGrid { index: usize },

    #[error("root finder did not converge after {sweeps} sweeps (worst residual {worst_residual:e})")]
    RootsNotConverged { sweeps: usize, worst_residual: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("covariance matrix is not positive semidefinite (pivot {pivot:e} at row {row})")]
    NotPositiveSemidefinite { row: usize, pivot: f64 },

    #[error("infinite measure: domain radius is unbounded")]
    InfiniteMeasure,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mismatched configurations: {0}")]
    MismatchedConfig(String),

    #[error("{failed} of {total} trials failed the root-finder gate (limit 1%)")]
    TooManyRootFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}
