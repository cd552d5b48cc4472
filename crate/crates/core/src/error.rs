use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("region mismatch: {0}")]
    Region(String),
    #[error("window overflow: {0}")]
    WindowOverflow(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("template budget exceeded: {0}")]
    Budget(String),
    #[error("non-monotone path: {0}")]
    NonMonotone(String),
    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("replica {index}: {source}")]
    Replica { index: u64, source: Box<Error> },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
