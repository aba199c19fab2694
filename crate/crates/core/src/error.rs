use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("arm constraint has multiple roots for alpha = {alpha} (must be < {max})")]
    MultiRoot { alpha: f64, max: f64 },
    #[error("inner flux solve did not converge (residual {residual:.3e} after {iterations} iterations)")]
    InnerSolve { residual: f64, iterations: usize },
    #[error("mode frequency is imaginary: {0}")]
    ImaginaryFrequency(String),
    #[error("pump amplitude is at or above parametric threshold")]
    AboveThreshold,
    #[error("signal amplitude must be nonzero")]
    ZeroAmplitude,
    #[error("window does not span an integer number of periods ({periods:.6})")]
    NonIntegerPeriods { periods: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("root not bracketed: {0}")]
    NotBracketed(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
