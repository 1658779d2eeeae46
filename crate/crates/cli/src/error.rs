use hecnn_approx::ApproxError;
use hecnn_core::{IoError, ModelError, NnError, QuantError};
use hecnn_he::HeError;
use thiserror::Error;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation = 2,
    Capacity = 3,
    Noise = 4,
    Transport = 5,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            2 => Some(Self::Validation),
            3 => Some(Self::Capacity),
            4 => Some(Self::Noise),
            5 => Some(Self::Transport),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Validation, message)
    }

    pub fn capacity(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Capacity, message)
    }

    pub fn noise(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Noise, message)
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Transport, message)
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }
}

fn he_kind(e: &HeError) -> ExitKind {
    match e {
        HeError::LevelExhausted { .. } | HeError::Capacity(_) => ExitKind::Capacity,
        HeError::NoiseExhausted { .. } | HeError::KeyMismatch(_) => ExitKind::Noise,
        _ => ExitKind::Validation,
    }
}

impl From<HeError> for CliError {
    fn from(e: HeError) -> Self {
        Self::new(he_kind(&e), e.to_string())
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        let kind = match e {
            QuantError::Overflow { .. } => ExitKind::Capacity,
            _ => ExitKind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        let kind = e.he_error().map_or(ExitKind::Validation, he_kind);
        Self::new(kind, e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Quant(q) => q.into(),
            other => Self::validation(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::validation(e.to_string())
    }
}

/// Attach a path to an I/O failure. Missing or unreadable files are validation errors.
pub fn file_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}
