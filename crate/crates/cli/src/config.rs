//! Session settings layered as flags > `CDL_*` environment > TOML config file.

use std::path::{Path, PathBuf};

use hecnn_he::{Backend, HeParams};
use serde::Deserialize;

use crate::error::{file_error, CliError};

pub const ENV_PREFIX: &str = "CDL_";
pub const DEFAULT_BATCH_SIZE: usize = 8192;

/// One layer of settings; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub params: Option<PathBuf>,
    pub public_key: Option<PathBuf>,
    pub secret_key: Option<PathBuf>,
    pub eval_key: Option<PathBuf>,
    pub model: Option<String>,
    pub batch_size: Option<usize>,
    pub backend: Option<String>,
    pub addr: Option<String>,
}

impl Settings {
    /// Field-wise `self.or(lower)`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            params: self.params.or(lower.params),
            public_key: self.public_key.or(lower.public_key),
            secret_key: self.secret_key.or(lower.secret_key),
            eval_key: self.eval_key.or(lower.eval_key),
            model: self.model.or(lower.model),
            batch_size: self.batch_size.or(lower.batch_size),
            backend: self.backend.or(lower.backend),
            addr: self.addr.or(lower.addr),
        }
    }

    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
        let get = |name: &str| lookup(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        let batch_size = match get("BATCH_SIZE") {
            Some(v) => Some(v.parse().map_err(|_| CliError::validation(format!("{ENV_PREFIX}BATCH_SIZE={v} is not a count")))?),
            None => None,
        };
        Ok(Settings {
            params: get("PARAMS").map(PathBuf::from),
            public_key: get("PUBLIC_KEY").map(PathBuf::from),
            secret_key: get("SECRET_KEY").map(PathBuf::from),
            eval_key: get("EVAL_KEY").map(PathBuf::from),
            model: get("MODEL"),
            batch_size,
            backend: get("BACKEND"),
            addr: get("ADDR"),
        })
    }

    pub fn from_toml(text: &str) -> Result<Settings, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        Self::from_toml(&text)
    }

    /// Resolve all three layers. The config file comes from `config` or `CDL_CONFIG`.
    pub fn layered(
        flags: Settings,
        config: Option<&Path>,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Settings, CliError> {
        let env_config = lookup(&format!("{ENV_PREFIX}CONFIG")).filter(|v| !v.is_empty()).map(PathBuf::from);
        let file = match config.map(Path::to_path_buf).or(env_config) {
            Some(path) => Settings::from_file(&path)?,
            None => Settings::default(),
        };
        Ok(flags.over(Settings::from_env(lookup)?).over(file))
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE)
    }

    pub fn backend(&self) -> Result<Option<Backend>, CliError> {
        self.backend.as_deref().map(|b| b.parse::<Backend>().map_err(CliError::from)).transpose()
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field.as_ref().ok_or_else(|| {
            CliError::validation(format!("{name} is not set (flag, {ENV_PREFIX}{} or config file)", name.to_uppercase().replace('-', "_")))
        })
    }
}

/// The batch must fit in the ciphertext slots.
pub fn check_batch_size(batch_size: usize, params: &HeParams) -> Result<(), CliError> {
    if batch_size == 0 || batch_size > params.slot_count {
        return Err(CliError::validation(format!(
            "batch size {batch_size} must be in 1..={} (slot count)",
            params.slot_count
        )));
    }
    Ok(())
}
