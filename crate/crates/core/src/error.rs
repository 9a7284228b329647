use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid team structure: {0}")]
    Structure(String),
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{count} joint actions exceed the brute-force cap of {cap}; validation is desk-scale only")]
    CapExceeded { count: u128, cap: u128 },
    #[error("step size {0} is outside [0, 1]")]
    StepSize(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
