//! Run manifests: the config echo plus artifact paths and timings, enough to
//! replay a command.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    /// Artifact name to path, relative to the manifest's directory.
    pub artifacts: BTreeMap<String, String>,
    pub durations_ms: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            config: config.echo(),
            artifacts: BTreeMap::new(),
            durations_ms: BTreeMap::new(),
            final_loss: None,
            notes: BTreeMap::new(),
        }
    }

    /// Recovers the experiment configuration from the echo, for replays.
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        let config: ExperimentConfig = serde_json::from_value(self.config.clone())?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
