use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid filter index k = {k} for {kind} (needs k >= {min})")]
    InvalidIndex { kind: &'static str, k: u64, min: u64 },
    #[error("negative weight {0} in weighted sum")]
    NegativeWeight(String),
    #[error("expression has zero total duration")]
    ZeroDuration,
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),
    #[error("translation invariance broken at j = {j}, d = {d}")]
    NotTranslationInvariant { j: usize, d: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("native coupling is zero at d = {0} but the target is not")]
    ZeroNative(usize),
    #[error("qubit count {n} exceeds the cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
