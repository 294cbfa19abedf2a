pub mod inverse;
pub mod sbc;
pub mod selftest;
pub mod solve;
pub mod sweep;

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

/// Loads a TOML or JSON config file, picked by extension.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let body = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&body)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        Some("json") => serde_json::from_str(&body)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        other => Err(CliError::Config(format!(
            "config {} has unsupported extension {:?} (use .toml or .json)",
            path.display(),
            other
        ))),
    }
}

pub fn to_config_value<T: serde::Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("config serialises")
}
