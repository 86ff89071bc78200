use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sigma out of range: got {value}, allowed {allowed}")]
    SigmaOutOfRange { value: f64, allowed: &'static str },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("weight must be strictly positive and finite: {0}")]
    NonpositiveWeight(String),
    #[error("coefficient field invalid: {0}")]
    InvalidCoefficient(String),
    #[error("size cap exceeded: n = {n}, cap = {cap}")]
    SizeCapExceeded { n: usize, cap: usize },
    #[error("matrix numerically defective: {0}")]
    Defective(String),
    #[error("spectrum outside admissible sector: {0}")]
    SpectrumOutOfSector(String),
    #[error("linear solve failed: {0}")]
    SingularSystem(String),
    #[error("quadrature failed to converge: {0}")]
    QuadratureNonconvergence(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for CoreError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        CoreError::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
