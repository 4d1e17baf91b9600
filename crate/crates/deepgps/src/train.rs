//! The training loop: epoch scheduling, batch iteration, and loss dispatch.
//!
//! The weakly-supervised method trains on intra-segment distance pairs only.
//! The supervised baseline is privileged: it reads the evaluation ground
//! truth through [`ConstraintGraph::ground_truth`] and refuses datasets where
//! it has been stripped.
//!
//! Every epoch reseeds the batch shuffler from `(shuffle_seed, epoch)`, so a
//! run resumed from a checkpoint at an epoch boundary replays the exact batch
//! sequence of an uninterrupted run.

use crate::collect::ConstraintGraph;
use crate::losses::{self, LossError};
use crate::net::{self, Activation, AdamHyper, AdamState, MlpModel, NetError};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset feature dim {dataset} does not match model input {model}")]
    DimensionMismatch { dataset: usize, model: usize },
    #[error("supervised training requires ground-truth positions, but the dataset has none")]
    GroundTruthUnavailable,
    #[error("learning-rate schedule must be non-empty and start at epoch 0")]
    BadSchedule,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Which objective drives the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    /// Weakly-supervised distance-constraint training.
    DeepGps,
    /// Position regression on ground truth (the privileged baseline).
    Supervised,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Piecewise-constant schedule: `(from_epoch, lr)` with the first entry
    /// at epoch 0.
    pub lr_schedule: Vec<(usize, f64)>,
    pub shuffle_seed: u64,
    pub adam: AdamHyper,
}

/// Trained model, optimizer state, and the per-epoch mean batch loss.
#[derive(Debug)]
pub struct TrainResult {
    pub model: MlpModel,
    pub state: AdamState,
    pub trace: Vec<f64>,
}

/// Learning rate in force at `epoch`.
pub fn lr_at(schedule: &[(usize, f64)], epoch: usize) -> f64 {
    let mut lr = schedule[0].1;
    for &(from, value) in schedule {
        if epoch >= from {
            lr = value;
        }
    }
    lr
}

fn check_schedule(schedule: &[(usize, f64)]) -> Result<(), TrainError> {
    if schedule.is_empty() || schedule[0].0 != 0 {
        return Err(TrainError::BadSchedule);
    }
    if schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(TrainError::BadSchedule);
    }
    Ok(())
}

/// Initializes a fresh model and trains for the configured epochs.
pub fn train(
    graph: &ConstraintGraph,
    layer_sizes: &[usize],
    activation: Activation,
    init_seed: u64,
    method: TrainMethod,
    config: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    let model = MlpModel::init(layer_sizes, activation, init_seed)?;
    let state = AdamState::new(&model, config.adam);
    train_range(graph, model, state, method, config, 0)
}

/// Continues training an existing model/optimizer pair from `start_epoch`
/// (exclusive of epochs already completed) through `config.epochs`.
pub fn train_range(
    graph: &ConstraintGraph,
    mut model: MlpModel,
    mut state: AdamState,
    method: TrainMethod,
    config: &TrainConfig,
    start_epoch: usize,
) -> Result<TrainResult, TrainError> {
    check_schedule(&config.lr_schedule)?;
    if graph.feature_dim() != model.input_dim() {
        return Err(TrainError::DimensionMismatch {
            dataset: graph.feature_dim(),
            model: model.input_dim(),
        });
    }
    let gt = match method {
        TrainMethod::Supervised => {
            Some(graph.ground_truth().ok_or(TrainError::GroundTruthUnavailable)?)
        }
        TrainMethod::DeepGps => None,
    };

    let mut trace = Vec::with_capacity(config.epochs.saturating_sub(start_epoch));
    for epoch in start_epoch..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        rng.set_stream(epoch as u64);
        let plans = losses::make_batches(graph, config.batch_size, &mut rng)?;
        let lr = lr_at(&config.lr_schedule, epoch);
        let mut epoch_loss = 0.0;
        for (batch_index, plan) in plans.iter().enumerate() {
            let batch = losses::materialize_batch(graph, plan);
            let (pred, cache) = model.forward(&batch.inputs)?;
            let loss = match method {
                TrainMethod::DeepGps => losses::dense_segment_loss(&pred, &plan.pairs)?,
                TrainMethod::Supervised => {
                    let gt = gt.expect("checked above");
                    let targets = Array2::from_shape_fn((plan.rows.len(), 2), |(r, c)| {
                        gt[plan.rows[r].obs_index][c]
                    });
                    losses::supervised_loss(&pred, &targets)?
                }
            };
            if !loss.value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_index });
            }
            let grads = net::backward(&model, &cache, &loss.grad)?;
            net::adam_step(&mut model, &mut state, &grads, lr)?;
            epoch_loss += loss.value;
        }
        trace.push(epoch_loss / plans.len().max(1) as f64);
    }
    Ok(TrainResult { model, state, trace })
}

/// Batched inference over arbitrary feature rows.
pub fn predict_features(model: &MlpModel, features: &[Vec<f64>]) -> Result<Array2<f64>, NetError> {
    let dim = model.input_dim();
    let mut out = Array2::zeros((features.len(), 2));
    const CHUNK: usize = 2048;
    for (chunk_index, chunk) in features.chunks(CHUNK).enumerate() {
        let mut inputs = Array2::zeros((chunk.len(), dim));
        for (r, row) in chunk.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                inputs[[r, c]] = *v;
            }
        }
        let pred = model.predict(&inputs)?;
        for r in 0..chunk.len() {
            out[[chunk_index * CHUNK + r, 0]] = pred[[r, 0]];
            out[[chunk_index * CHUNK + r, 1]] = pred[[r, 1]];
        }
    }
    Ok(out)
}

/// Predictions for every observation in a graph, in index order.
pub fn predict_graph(model: &MlpModel, graph: &ConstraintGraph) -> Result<Array2<f64>, NetError> {
    let features: Vec<Vec<f64>> =
        graph.observations().iter().map(|o| o.features()).collect();
    predict_features(model, &features)
}
