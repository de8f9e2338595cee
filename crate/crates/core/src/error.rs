use thiserror::Error;

pub type Result<T> = std::result::Result<T, TcfError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TcfError {
    #[error("scale matrix is not symmetric positive definite")]
    InvalidScale,
    #[error("kernel weight {0} is not a positive finite number")]
    InvalidWeight(f64),
    #[error("field is not differentiable at the query point")]
    SingularPoint,
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("field has no kernel centers")]
    EmptyField,
    #[error("intensity {value} is at or below the mask floor {floor}")]
    MaskedLowIntensity { value: f64, floor: f64 },
    #[error("Hessian has non-finite entries")]
    InvalidHessian,
    #[error("eigenvalue magnitudes are repeated (gap {gap:e})")]
    DegenerateFrame { gap: f64 },
    #[error("direction system is ill-conditioned (rcond {rcond:e})")]
    IllConditionedSystem { rcond: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("only 2-D and 3-D inputs are supported, got {0}-D")]
    UnsupportedDimension(usize),
    #[error("oracle unstable: {0}")]
    OracleUnstable(String),
}
