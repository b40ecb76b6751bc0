use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent p = {0} is outside (1, inf)")]
    ExponentOutOfRange(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("field shapes or windows do not match: {0}")]
    Mismatch(String),
    #[error("cube {0} lies outside the window")]
    OutsideWindow(String),
    #[error("cube lies outside the configured universe")]
    OutsideUniverse,
    #[error(
        "spectrum has content at level {level} but the operator needs support at levels <= {max}"
    )]
    Headroom { level: u32, max: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("operator of dimension {0} exceeds the dense cap {1}")]
    TooLarge(usize, usize),
    #[error("lambda search exhausted its cap {0:e}")]
    LambdaCap(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
