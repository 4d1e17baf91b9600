//! Experiment configuration: a strict TOML schema with named seeds.
//!
//! Unknown keys are rejected everywhere; a silent typo in an experiment file
//! is the costliest failure mode this tool has. All randomness flows from the
//! named seeds below, one per concern, so each pipeline stage is
//! independently reproducible.

use deepgps::collect::{NoiseConfig, NoiseMode, ObsConfig, SampleBudget};
use deepgps::env::{Bounds, CellRect, RoomSpec};
use deepgps::net::AdamHyper;
use deepgps::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub environment: EnvironmentSection,
    pub collection: CollectionSection,
    pub observation: ObservationSection,
    pub noise: NoiseSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub method: MethodSection,
    pub eval: EvalSection,
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum EnvironmentSection {
    Landmarks {
        /// xmin, xmax, ymin, ymax.
        bounds: [f64; 4],
        landmark_count: usize,
    },
    Room {
        rows: usize,
        cols: usize,
        cell_size: f64,
        #[serde(default)]
        origin: [f64; 2],
        #[serde(default)]
        obstacles: Vec<[usize; 4]>,
        #[serde(default)]
        random_obstacles: usize,
        #[serde(default = "default_obstacle_span")]
        obstacle_span: [usize; 2],
    },
    File {
        path: String,
    },
}

fn default_obstacle_span() -> [usize; 2] {
    [4, 10]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "strategy")]
pub enum CollectionSection {
    Dense {
        spacing: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget_positions: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget_segments: Option<usize>,
    },
    Endpoint {
        waypoints: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "modality")]
pub enum ObservationSection {
    Landmarks {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_max: Option<f64>,
    },
    Lidar {
        n_beams: usize,
        max_range: f64,
        orientation_grid: usize,
        orientation_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub w: f64,
    #[serde(default)]
    pub mode: NoiseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub layers: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: String,
}

fn default_activation() -> String {
    "relu".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    /// Piecewise-constant schedule: `[[from_epoch, lr], ...]`.
    pub lr_schedule: Vec<(usize, f64)>,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_epsilon")]
    pub adam_epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[serde(rename = "deepgps")]
    DeepGps,
    Supervised,
    Explicit,
    MdsOracle,
    PcaKnn,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::DeepGps => "deepgps",
            MethodName::Supervised => "supervised",
            MethodName::Explicit => "explicit",
            MethodName::MdsOracle => "mds_oracle",
            MethodName::PcaKnn => "pca_knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: MethodName,
    /// Explicit positioning: random restarts kept by best residual.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Explicit positioning / MDS oracle: positions drawn from the dataset.
    #[serde(default = "default_subsample")]
    pub subsample_positions: usize,
    /// Explicit positioning: Levenberg-Marquardt iteration cap.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// PCA+KNN: retained principal components.
    #[serde(default = "default_pca_components")]
    pub pca_components: usize,
}

fn default_restarts() -> usize {
    10
}

fn default_subsample() -> usize {
    300
}

fn default_max_iters() -> usize {
    60
}

fn default_pca_components() -> usize {
    128
}

impl Default for MethodSection {
    fn default() -> Self {
        Self {
            name: MethodName::DeepGps,
            restarts: default_restarts(),
            subsample_positions: default_subsample(),
            max_iters: default_max_iters(),
            pca_components: default_pca_components(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Error-grid resolution (nx, ny).
    pub grid: [usize; 2],
    /// Training-trajectory points used to estimate the rigid alignment.
    pub alignment_points: usize,
    /// Random free test positions for ATE (0 means evaluate on the grid).
    #[serde(default)]
    pub test_positions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub env: u64,
    pub trajectory: u64,
    pub noise: u64,
    pub init: u64,
    pub shuffle: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum SweepSection {
    Noise { w_values: Vec<f64> },
    Samples { n_values: Vec<usize> },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| {
            Err(CliError::InvalidConfig(format!("{field}: {why}")))
        };
        if self.schema_version != 1 {
            return bad("schema_version", "must be 1");
        }
        match &self.environment {
            EnvironmentSection::Landmarks { bounds, landmark_count } => {
                if !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) {
                    return bad("environment.bounds", "must satisfy xmin < xmax and ymin < ymax");
                }
                if *landmark_count == 0 {
                    return bad("environment.landmark_count", "must be positive");
                }
            }
            EnvironmentSection::Room { rows, cols, cell_size, obstacle_span, .. } => {
                if *rows < 3 || *cols < 3 {
                    return bad("environment.rows/cols", "room must be at least 3x3");
                }
                if !(*cell_size > 0.0) {
                    return bad("environment.cell_size", "must be positive");
                }
                if obstacle_span[0] == 0 || obstacle_span[0] > obstacle_span[1] {
                    return bad("environment.obstacle_span", "must be a nonempty range");
                }
            }
            EnvironmentSection::File { path } => {
                if path.is_empty() {
                    return bad("environment.path", "must not be empty");
                }
            }
        }
        match &self.collection {
            CollectionSection::Dense { spacing, budget_positions, budget_segments } => {
                if !(*spacing > 0.0) {
                    return bad("collection.spacing", "must be positive");
                }
                match (budget_positions, budget_segments) {
                    (Some(p), None) if *p >= 2 => {}
                    (None, Some(s)) if *s >= 1 => {}
                    (Some(_), Some(_)) => {
                        return bad(
                            "collection",
                            "set exactly one of budget_positions or budget_segments",
                        )
                    }
                    _ => {
                        return bad(
                            "collection",
                            "dense collection needs budget_positions >= 2 or budget_segments >= 1",
                        )
                    }
                }
            }
            CollectionSection::Endpoint { waypoints } => {
                if *waypoints < 2 {
                    return bad("collection.waypoints", "must be at least 2");
                }
            }
        }
        match &self.observation {
            ObservationSection::Landmarks { d_max } => {
                if let Some(dm) = d_max {
                    if !(*dm > 0.0) {
                        return bad("observation.d_max", "must be positive when set");
                    }
                }
            }
            ObservationSection::Lidar {
                n_beams,
                max_range,
                orientation_grid,
                orientation_samples,
            } => {
                if *n_beams == 0 {
                    return bad("observation.n_beams", "must be positive");
                }
                if !(*max_range > 0.0) {
                    return bad("observation.max_range", "must be positive");
                }
                if *orientation_samples == 0 || orientation_samples > orientation_grid {
                    return bad(
                        "observation.orientation_samples",
                        "must satisfy 1 <= samples <= grid",
                    );
                }
            }
        }
        if self.noise.w < 0.0 {
            return bad("noise.w", "must be nonnegative");
        }
        if self.model.layers.len() < 2 {
            return bad("model.layers", "must list input and output sizes");
        }
        if self.model.layers.last() != Some(&2) {
            return bad("model.layers", "output layer must have 2 units");
        }
        if self.model.activation != "relu" {
            return bad("model.activation", "only \"relu\" is supported");
        }
        if self.training.epochs == 0 {
            return bad("training.epochs", "must be positive");
        }
        if self.training.batch_size < 2 {
            return bad("training.batch_size", "must be at least 2");
        }
        if self.training.lr_schedule.is_empty() || self.training.lr_schedule[0].0 != 0 {
            return bad("training.lr_schedule", "must be non-empty and start at epoch 0");
        }
        if self.training.lr_schedule.iter().any(|(_, lr)| !(*lr > 0.0)) {
            return bad("training.lr_schedule", "learning rates must be positive");
        }
        if self.eval.grid[0] < 2 || self.eval.grid[1] < 2 {
            return bad("eval.grid", "resolution must be at least 2 per axis");
        }
        if self.eval.alignment_points == 0 {
            return bad("eval.alignment_points", "must be positive");
        }
        match (&self.method.name, &self.observation) {
            (MethodName::Explicit, ObservationSection::Lidar { .. }) => {
                return bad("method.name", "explicit positioning needs landmark observations")
            }
            _ => {}
        }
        if let Some(sweep) = &self.sweep {
            match sweep {
                SweepSection::Noise { w_values } => {
                    if w_values.is_empty() {
                        return bad("sweep.w_values", "must not be empty");
                    }
                    if w_values[0] < 0.0 || w_values.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("sweep.w_values", "must be nonnegative and increasing");
                    }
                }
                SweepSection::Samples { n_values } => {
                    if n_values.is_empty() {
                        return bad("sweep.n_values", "must not be empty");
                    }
                    if n_values.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("sweep.n_values", "must be strictly increasing");
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a `--seed-override name=value` pair.
    pub fn override_seed(&mut self, name: &str, value: u64) -> Result<(), CliError> {
        match name {
            "env" => self.seeds.env = value,
            "trajectory" => self.seeds.trajectory = value,
            "noise" => self.seeds.noise = value,
            "init" => self.seeds.init = value,
            "shuffle" => self.seeds.shuffle = value,
            "eval" => self.seeds.eval = value,
            other => {
                return Err(CliError::InvalidConfig(format!(
                    "seeds.{other}: unknown seed name (env, trajectory, noise, init, shuffle, eval)"
                )))
            }
        }
        Ok(())
    }

    /// JSON echo embedded in datasets, checkpoints, and manifests.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    // --- lowering into library types ---

    pub fn room_spec(&self) -> Option<RoomSpec> {
        match &self.environment {
            EnvironmentSection::Room {
                rows,
                cols,
                cell_size,
                origin,
                obstacles,
                random_obstacles,
                obstacle_span,
            } => Some(RoomSpec {
                rows: *rows,
                cols: *cols,
                cell_size: *cell_size,
                origin: *origin,
                obstacles: obstacles
                    .iter()
                    .map(|o| CellRect { row: o[0], col: o[1], rows: o[2], cols: o[3] })
                    .collect(),
                random_obstacles: *random_obstacles,
                obstacle_span: (obstacle_span[0], obstacle_span[1]),
                max_attempts: 100,
            }),
            _ => None,
        }
    }

    pub fn bounds(&self) -> Option<Bounds> {
        match &self.environment {
            EnvironmentSection::Landmarks { bounds, .. } => {
                Some(Bounds { xmin: bounds[0], xmax: bounds[1], ymin: bounds[2], ymax: bounds[3] })
            }
            _ => None,
        }
    }

    pub fn obs_config(&self) -> ObsConfig {
        match &self.observation {
            ObservationSection::Landmarks { d_max } => ObsConfig::Landmarks { d_max: *d_max },
            ObservationSection::Lidar {
                n_beams,
                max_range,
                orientation_grid,
                orientation_samples,
            } => ObsConfig::Lidar {
                n_beams: *n_beams,
                max_range: *max_range,
                orientation_grid: *orientation_grid,
                orientation_samples: *orientation_samples,
            },
        }
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { w: self.noise.w, seed: self.seeds.noise, mode: self.noise.mode }
    }

    pub fn sample_budget(&self) -> Option<SampleBudget> {
        match &self.collection {
            CollectionSection::Dense { budget_positions, budget_segments, .. } => {
                budget_positions
                    .map(SampleBudget::Positions)
                    .or(budget_segments.map(SampleBudget::Segments))
            }
            CollectionSection::Endpoint { .. } => None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            lr_schedule: self.training.lr_schedule.clone(),
            shuffle_seed: self.seeds.shuffle,
            adam: AdamHyper {
                beta1: self.training.adam_beta1,
                beta2: self.training.adam_beta2,
                epsilon: self.training.adam_epsilon,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
schema_version = 1

[environment]
kind = "landmarks"
bounds = [-1.0, 1.0, -1.0, 1.0]
landmark_count = 16

[collection]
strategy = "dense"
spacing = 0.05
budget_positions = 100

[observation]
modality = "landmarks"

[noise]
w = 0.0

[model]
layers = [16, 32, 2]

[training]
epochs = 5
batch_size = 32
lr_schedule = [[0, 1e-3]]

[method]
name = "deepgps"

[eval]
grid = [16, 16]
alignment_points = 50

[seeds]
env = 1
trajectory = 2
noise = 3
init = 4
shuffle = 5
eval = 6
"#
    }

    #[test]
    fn minimal_config_parses_and_validates() {
        let config = ExperimentConfig::from_toml(minimal_toml()).unwrap();
        assert_eq!(config.method.name, MethodName::DeepGps);
        assert_eq!(config.model.layers, vec![16, 32, 2]);
        assert!(config.sample_budget().is_some());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_toml().replace("[noise]\nw = 0.0", "[noise]\nw = 0.0\ntypo_key = 1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("typo_key"), "message was: {msg}");
    }

    #[test]
    fn invalid_fields_are_named() {
        let text = minimal_toml().replace("batch_size = 32", "batch_size = 1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("batch_size"), "message was: {err}");

        let text = minimal_toml().replace("layers = [16, 32, 2]", "layers = [16, 32, 3]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("model.layers"), "message was: {err}");
    }

    #[test]
    fn seed_overrides_apply_by_name() {
        let mut config = ExperimentConfig::from_toml(minimal_toml()).unwrap();
        config.override_seed("init", 99).unwrap();
        assert_eq!(config.seeds.init, 99);
        assert!(config.override_seed("bogus", 1).is_err());
    }

    #[test]
    fn config_echo_roundtrips() {
        let config = ExperimentConfig::from_toml(minimal_toml()).unwrap();
        let echo = config.echo();
        let back: ExperimentConfig = serde_json::from_value(echo).unwrap();
        assert_eq!(config, back);
    }
}
