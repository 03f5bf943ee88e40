use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the padded domain |x| <= {limit}")]
    PointOutsideDomain { point: Vec<f64>, limit: f64 },

    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("metric is near-singular at {point:?} (condition number {condition:e})")]
    NearSingular { point: Vec<f64>, condition: f64 },

    #[error("degenerate plane: tangent vectors are (nearly) collinear")]
    DegeneratePlane,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric description: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ray in direction {direction:?} did not exit the unit ball within length {max_length}")]
    NoExit { direction: Vec<f64>, max_length: f64 },

    #[error("ray in direction {direction:?} meets the boundary non-transversally (d|x|^2/dt = {rate:e})")]
    NotTransversal { direction: Vec<f64>, rate: f64 },

    #[error("integration step underflow ({0:e})")]
    StepUnderflow(f64),

    #[error("non-finite state while integrating direction {direction:?}")]
    NonFinite { direction: Vec<f64> },

    #[error("curvature certification failed: max sampled sectional curvature {worst:e} at {point:?} exceeds ceiling {ceiling}")]
    CertificationFailed { worst: f64, point: Vec<f64>, ceiling: f64 },

    #[error("search budget exhausted with zero feasible samples")]
    NoFeasibleSample,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
