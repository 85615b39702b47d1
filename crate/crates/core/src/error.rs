use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("alpha = {0} is outside the admissible range (0, 2)")]
    AlphaOutOfRange(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid interval set: {0}")]
    InvalidIntervals(String),
    #[error("eigensolver failed: {0}")]
    EigenSolve(String),
    #[error("Bessel zero search failed: {0}")]
    BesselZero(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("quantity undefined for the zero state")]
    ZeroState,
    #[error("schedule construction failed: {0}")]
    Schedule(String),
    #[error("accuracy target for mode {mode} unreachable (achieved {achieved:e}, target {target:e}); increase the buffer")]
    TargetUnreachable {
        mode: usize,
        achieved: f64,
        target: f64,
    },
    #[error("value not representable in double precision: {0}")]
    Overflow(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
