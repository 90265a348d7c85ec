use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate population: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("population is not standardized (sum = {sum:e}, sum of squares - N = {ss:e})")]
    NotStandardized { sum: f64, ss: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("t-statistic undefined: sample is constant")]
    ConstantSample,
    #[error("root finding failed: {0}")]
    NoConvergence(String),
    #[error("value outside attainable range: {0}")]
    OutOfRange(String),
    #[error("rejection sampling infeasible: expected acceptance {0:e} below 1e-6")]
    AcceptanceTooLow(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
