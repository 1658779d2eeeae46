use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("modulus capacity: {0}")]
    Capacity(String),
    #[error("parameter mismatch: {0}")]
    ParamsMismatch(String),
    #[error("slot value {value} at index {index} is not reduced mod {p}")]
    ValueOutOfRange { index: usize, value: u64, p: u64 },
    #[error("{len} slots exceed slot count {slot_count}")]
    TooManySlots { len: usize, slot_count: usize },
    #[error("level exhausted: operand at level {level}, operation needs {needed}")]
    LevelExhausted { level: u32, needed: u32 },
    #[error("noise budget exhausted ({budget:.2} bits)")]
    NoiseExhausted { budget: f64 },
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("unsupported on this backend: {0}")]
    Unsupported(String),
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
