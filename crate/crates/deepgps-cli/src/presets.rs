//! Presets shipped in the binary for one-command reproduction.

use crate::config::ExperimentConfig;
use crate::error::CliError;

const PRESETS: &[(&str, &str)] = &[
    ("toy-complete", include_str!("../presets/toy-complete.toml")),
    ("toy-incomplete", include_str!("../presets/toy-incomplete.toml")),
    ("lidar-room", include_str!("../presets/lidar-room.toml")),
    ("endpoint", include_str!("../presets/endpoint.toml")),
    ("noise-sweep", include_str!("../presets/noise-sweep.toml")),
    ("sample-sweep", include_str!("../presets/sample-sweep.toml")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

pub fn load(name: &str) -> Result<ExperimentConfig, CliError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            CliError::InvalidConfig(format!(
                "preset: unknown name {name:?} (available: {})",
                names().join(", ")
            ))
        })?;
    ExperimentConfig::from_toml(text)
}
