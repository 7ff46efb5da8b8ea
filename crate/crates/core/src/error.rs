use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("unstable polynomial: {0}")]
    Unstable(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("metric is not positive definite: {0}")]
    Metric(String),
    #[error("sequencing error: expected time {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },
    #[error("time index {index} out of range (logged through {available})")]
    Range { index: usize, available: usize },
    #[error("degenerate leading gain {0:e}")]
    DegenerateGain(f64),
    #[error("parameters not identifiable: condition number {0:e}")]
    Identifiability(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
