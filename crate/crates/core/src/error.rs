use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("induced chain is not unichain: {0}")]
    NotUnichain(String),

    #[error("direction must have unit norm (got norm {0})")]
    NonUnitDirection(f64),

    #[error("value iteration did not converge after {iterations} iterations (last span {last_span:e})")]
    NoConvergence { iterations: usize, last_span: f64 },

    #[error("enumeration budget exceeded: {needed} policy pairs > {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("support function undefined for non-convex target")]
    NonConvexSupport,

    #[error("point is not a nearest point of the target (gap {0:e})")]
    NotNearestPoint(f64),

    #[error("scripted adversary exhausted after {0} actions")]
    ScriptExhausted(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn at_step(self, step: u64) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
