use hecnn_he::HeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("layer {index}: {message}")]
    Shape { index: usize, message: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("batch_norm at layer {index} has no preceding conv2d/dense to fold into")]
    Unfoldable { index: usize },
}

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("value {value} at scale {scale} rounds to {rounded}, outside ±p/2 for p = {p}")]
    Overflow { value: f64, scale: f64, rounded: f64, p: u64 },
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("model contains an unfolded batch_norm at layer {0}")]
    UnfoldedBatchNorm(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("input has shape {got}, model expects {expected}")]
    InputShape { got: String, expected: String },
    #[error("layer {index} ({kind}): {source}")]
    Layer {
        index: usize,
        kind: &'static str,
        #[source]
        source: HeError,
    },
}

impl NnError {
    /// The underlying HE failure, if any.
    pub fn he_error(&self) -> Option<&HeError> {
        match self {
            NnError::Layer { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("blob: {0}")]
    Blob(String),
    #[error("IDX: {0}")]
    Idx(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}
