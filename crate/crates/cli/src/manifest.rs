//! Run manifests: the atomic completion marker of every subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

/// Written last, after all data files exist; its presence marks a
/// completed run. Wall time lives here (and only here) so the data
/// files stay byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    /// Header line of each CSV output, keyed by file name.
    pub csv_headers: BTreeMap<String, String>,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    seed: u64,
    outputs: Vec<PathBuf>,
    csv_headers: BTreeMap<String, String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            config,
            seed,
            outputs: Vec::new(),
            csv_headers: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn add_csv(&mut self, path: &Path, header: &str) {
        self.add_output(path);
        if let Some(name) = path.file_name() {
            self.csv_headers.insert(name.to_string_lossy().into_owned(), header.to_string());
        }
    }

    /// Validates that every recorded output exists, then writes
    /// `manifest.json` into `dir`.
    pub fn write(self, dir: &Path) -> Result<PathBuf, CliError> {
        for path in &self.outputs {
            if !path.exists() {
                return Err(CliError::Internal(format!(
                    "output {} was recorded but never written",
                    path.display()
                )));
            }
        }
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
            csv_headers: self.csv_headers,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Creates the output directory and returns it.
pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}
