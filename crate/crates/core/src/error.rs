use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("endpoint sampling exhausted after {attempts} candidate pairs")]
    SamplingExhausted { attempts: usize },

    #[error("no decision options at intersection")]
    NoOptions,

    #[error("landmark fix rejected: Mahalanobis distance {distance:.3} exceeds gate {gate}")]
    FixRejected { distance: f64, gate: f64 },

    #[error("message value {0} must lie strictly inside (0, 1)")]
    SaturatedMessage(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
