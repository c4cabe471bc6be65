//! Run manifests: enough context to reproduce any data-producing run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use polchip_core::{ChipConfig, RawChipConfig};
use serde::Serialize;

use crate::error::AppError;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RawChipConfig>,
    pub grids: serde_json::Value,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], config: &ChipConfig) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: Some(config.to_raw()),
            grids: serde_json::Value::Null,
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    /// Manifest of a run that takes no chip configuration (fits).
    pub fn bare(command: &str, argv: &[String]) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: None,
            grids: serde_json::Value::Null,
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    pub fn grids(mut self, grids: serde_json::Value) -> Self {
        self.grids = grids;
        self
    }

    pub fn outputs(mut self, outputs: &[PathBuf]) -> Self {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn finish(mut self, start: Instant) -> Self {
        self.duration_seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| AppError::Io(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))
    }
}
