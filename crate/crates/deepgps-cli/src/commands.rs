//! The four experiment commands: collect, train, eval, sweep.
//!
//! Each command is a pure function of (config, input artifacts) to output
//! files plus a manifest; no command mutates its inputs. Sweeps drive the
//! library harnesses with closures that rerun the in-memory pipeline per
//! swept value, sharing every seed except the swept factor.

use deepgps::baselines::{
    classical_mds, explicit_solve_restarts, triangulate, BaselineArtifact, EdmMatrix, LmOptions,
    PcaKnnModel,
};
use deepgps::collect::{
    collect_dense, collect_endpoint, load_dataset, observe_landmarks, observe_lidar, save_dataset,
    truncate_to_sample_count, ConstraintGraph, DatasetHeader, ObsConfig,
};
use deepgps::env::{
    generate_landmark_env, generate_room_env, load_environment, save_environment, Environment2D,
    Point2,
};
use deepgps::eval::{
    ate_stats, error_entries, grid_positions, noise_sweep, rigid_align, sample_count_sweep,
    save_eval_report, synthesize_features, write_ate_summary_csv, write_error_grid_csv,
    write_sweep_csv, AteAlignment, AteSummary, EvalError, EvalReport, GridEntry,
};
use deepgps::net::{load_checkpoint, save_checkpoint, Activation, MlpModel};
use deepgps::train::{predict_features, train, TrainMethod, TrainResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{
    CollectionSection, EnvironmentSection, ExperimentConfig, MethodName, SweepSection,
};
use crate::error::CliError;
use crate::manifest::RunManifest;

pub const ENV_FILE: &str = "env.json";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const BASELINE_FILE: &str = "baseline.json";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const ATE_SUMMARY_FILE: &str = "ate_summary.csv";
pub const ERROR_GRID_FILE: &str = "error_grid.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative artifact path for the trained model of the configured method.
pub fn model_artifact_name(method: MethodName) -> &'static str {
    match method {
        MethodName::DeepGps | MethodName::Supervised => CHECKPOINT_FILE,
        _ => BASELINE_FILE,
    }
}

/// Builds or loads the environment named by the config.
pub fn resolve_environment(config: &ExperimentConfig) -> Result<Environment2D, CliError> {
    match &config.environment {
        EnvironmentSection::Landmarks { landmark_count, .. } => {
            let bounds = config.bounds().expect("landmarks kind");
            Ok(generate_landmark_env(bounds, *landmark_count, config.seeds.env)?)
        }
        EnvironmentSection::Room { .. } => {
            let spec = config.room_spec().expect("room kind");
            Ok(generate_room_env(&spec, config.seeds.env)?)
        }
        EnvironmentSection::File { path } => Ok(load_environment(Path::new(path))?),
    }
}

/// Runs the configured collection strategy.
pub fn collect_graph(
    config: &ExperimentConfig,
    env: &Environment2D,
) -> Result<ConstraintGraph, CliError> {
    let obs = config.obs_config();
    let noise = config.noise_config();
    let graph = match &config.collection {
        CollectionSection::Dense { .. } => {
            let budget = config.sample_budget().expect("validated");
            let spacing = match &config.collection {
                CollectionSection::Dense { spacing, .. } => *spacing,
                _ => unreachable!(),
            };
            collect_dense(env, budget, spacing, &obs, &noise, config.seeds.trajectory)?
        }
        CollectionSection::Endpoint { waypoints } => {
            collect_endpoint(env, *waypoints, &obs, &noise, config.seeds.trajectory)?
        }
    };
    Ok(graph)
}

/// `collect`: generate (or load) the environment, run the trajectory, write
/// `env.json` and `dataset.jsonl`.
pub fn cmd_collect(config: &ExperimentConfig, out: &Path) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("collect", config);

    let t0 = Instant::now();
    let env = resolve_environment(config)?;
    save_environment(&env, &out.join(ENV_FILE))?;
    manifest.durations_ms.insert("environment".into(), t0.elapsed().as_millis() as u64);

    let t0 = Instant::now();
    let graph = collect_graph(config, &env)?;
    let header = DatasetHeader {
        env_reference: Some(ENV_FILE.to_string()),
        config: Some(config.echo()),
        seed: Some(config.seeds.trajectory),
    };
    save_dataset(&graph, &header, &out.join(DATASET_FILE))?;
    manifest.durations_ms.insert("collect".into(), t0.elapsed().as_millis() as u64);

    manifest.artifacts.insert("environment".into(), ENV_FILE.into());
    manifest.artifacts.insert("dataset".into(), DATASET_FILE.into());
    manifest.notes.insert("observations".into(), graph.len().into());
    manifest.notes.insert("segments".into(), graph.segments().len().into());
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// A trained artifact, in memory.
pub enum TrainedModel {
    Network(TrainResult),
    Baseline(BaselineArtifact),
}

/// Trains (or fits) the configured method on an in-memory graph.
pub fn train_on_graph(
    config: &ExperimentConfig,
    env: &Environment2D,
    graph: &ConstraintGraph,
) -> Result<TrainedModel, CliError> {
    match config.method.name {
        MethodName::DeepGps | MethodName::Supervised => {
            let method = if config.method.name == MethodName::DeepGps {
                TrainMethod::DeepGps
            } else {
                TrainMethod::Supervised
            };
            let result = train(
                graph,
                &config.model.layers,
                Activation::Relu,
                config.seeds.init,
                method,
                &config.train_config(),
            )?;
            Ok(TrainedModel::Network(result))
        }
        MethodName::Explicit => {
            let sub = truncate_to_sample_count(
                graph,
                config.method.subsample_positions.min(graph.len()),
                config.seeds.shuffle,
            )?;
            let d_max = match config.obs_config() {
                ObsConfig::Landmarks { d_max } => d_max,
                _ => None,
            };
            let opts = LmOptions { max_iters: config.method.max_iters, ..Default::default() };
            let solved = explicit_solve_restarts(
                &sub,
                env.landmarks().len(),
                d_max,
                env.bounds(),
                config.method.restarts,
                config.seeds.init,
                &opts,
            )?;
            Ok(TrainedModel::Baseline(BaselineArtifact::Explicit {
                landmarks: solved.landmarks.clone(),
                positions: solved.positions.clone(),
                residual_norm: solved.residual_norm(),
                iterations: solved.iterations,
            }))
        }
        MethodName::MdsOracle => {
            let gt = graph
                .ground_truth()
                .ok_or(deepgps::train::TrainError::GroundTruthUnavailable)
                .map_err(CliError::Train)?;
            let indices = mds_subsample_indices(config, graph.len());
            let points: Vec<Point2> = indices.iter().map(|&i| gt[i]).collect();
            let edm = EdmMatrix::from_points(&points);
            let solution = classical_mds(&edm, 2)?;
            Ok(TrainedModel::Baseline(BaselineArtifact::MdsOracle {
                positions: solution.points_2d(),
            }))
        }
        MethodName::PcaKnn => {
            let gt = graph
                .ground_truth()
                .ok_or(deepgps::train::TrainError::GroundTruthUnavailable)
                .map_err(CliError::Train)?;
            let features: Vec<Vec<f64>> =
                graph.observations().iter().map(|o| o.features()).collect();
            let model = PcaKnnModel::fit(&features, gt, config.method.pca_components)?;
            Ok(TrainedModel::Baseline(BaselineArtifact::PcaKnn(model)))
        }
    }
}

/// `train`: load the dataset, run the configured method, write the model
/// artifact (and the loss trace for network methods).
pub fn cmd_train(
    config: &ExperimentConfig,
    dataset: &Path,
    out: &Path,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("train", config);
    let (graph, _header) = load_dataset(dataset)?;
    check_model_dims(config, &graph)?;
    let env = resolve_environment(config)?;

    let t0 = Instant::now();
    let trained = train_on_graph(config, &env, &graph)?;
    manifest.durations_ms.insert("train".into(), t0.elapsed().as_millis() as u64);

    match &trained {
        TrainedModel::Network(result) => {
            let echo = config.echo();
            save_checkpoint(&result.model, &result.state, Some(&echo), &out.join(CHECKPOINT_FILE))?;
            let mut trace = std::fs::File::create(out.join(LOSS_TRACE_FILE))?;
            writeln!(trace, "epoch,loss")?;
            for (epoch, loss) in result.trace.iter().enumerate() {
                writeln!(trace, "{epoch},{loss}")?;
            }
            manifest.artifacts.insert("checkpoint".into(), CHECKPOINT_FILE.into());
            manifest.artifacts.insert("loss_trace".into(), LOSS_TRACE_FILE.into());
            manifest.final_loss = result.trace.last().copied();
        }
        TrainedModel::Baseline(artifact) => {
            artifact.save(&out.join(BASELINE_FILE))?;
            manifest.artifacts.insert("baseline".into(), BASELINE_FILE.into());
            if let BaselineArtifact::Explicit { residual_norm, iterations, .. } = artifact {
                manifest.notes.insert("residual_norm".into(), (*residual_norm).into());
                manifest.notes.insert("iterations".into(), (*iterations).into());
            }
        }
    }
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// The dataset rows the MDS oracle is fit on, shared by train and eval.
fn mds_subsample_indices(config: &ExperimentConfig, len: usize) -> Vec<usize> {
    let n = config.method.subsample_positions.min(len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.shuffle);
    let mut indices: Vec<usize> = rand::seq::index::sample(&mut rng, len, n).into_vec();
    indices.sort_unstable();
    indices
}

/// Dataset/model compatibility for network methods.
fn check_model_dims(config: &ExperimentConfig, graph: &ConstraintGraph) -> Result<(), CliError> {
    if matches!(config.method.name, MethodName::DeepGps | MethodName::Supervised)
        && graph.feature_dim() != config.model.layers[0]
    {
        return Err(CliError::InvalidConfig(format!(
            "model.layers: input width {} does not match dataset feature dim {}",
            config.model.layers[0],
            graph.feature_dim()
        )));
    }
    Ok(())
}

/// Prediction routes shared by evaluation targets.
enum Predictor<'a> {
    Network(&'a MlpModel),
    PcaKnn(&'a PcaKnnModel),
    /// Triangulation against solved landmarks; entries clipped at `d_max`
    /// are excluded per query.
    Explicit { landmarks: &'a [Point2], d_max: Option<f64> },
}

impl Predictor<'_> {
    /// Predicts a position per feature row; `None` marks queries the method
    /// cannot answer (degenerate triangulation geometry).
    fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<Option<Point2>>, CliError> {
        match self {
            Predictor::Network(model) => {
                let pred = predict_features(model, features).map_err(CliError::Net)?;
                Ok((0..features.len()).map(|i| Some([pred[[i, 0]], pred[[i, 1]]])).collect())
            }
            Predictor::PcaKnn(model) => features
                .iter()
                .map(|f| model.predict(f).map(Some).map_err(CliError::Baseline))
                .collect(),
            Predictor::Explicit { landmarks, d_max } => Ok(features
                .iter()
                .map(|ranges| triangulate(landmarks, ranges, *d_max).ok())
                .collect()),
        }
    }
}

/// Everything `eval` writes, kept for sweeps to reuse.
pub struct EvalOutcome {
    pub report: EvalReport,
    pub summary_rows: Vec<(String, String, AteSummary)>,
    pub grid_entries: Option<Vec<GridEntry>>,
    pub skipped_queries: usize,
}

/// Evaluates a trained artifact against the configured targets.
pub fn evaluate(
    config: &ExperimentConfig,
    env: &Environment2D,
    graph: &ConstraintGraph,
    trained: &TrainedModel,
    dataset_name: &str,
) -> Result<EvalOutcome, CliError> {
    let gt = graph
        .ground_truth()
        .ok_or(deepgps::train::TrainError::GroundTruthUnavailable)
        .map_err(CliError::Train)?;

    // MDS positions have no out-of-sample route; score them in place.
    if let TrainedModel::Baseline(BaselineArtifact::MdsOracle { positions }) = trained {
        let indices = mds_subsample_indices(config, graph.len());
        let truth: Vec<Point2> = indices.iter().map(|&i| gt[i]).collect();
        let report = ate_stats(positions, &truth, AteAlignment::Fit)?;
        let rows = vec![("mds_oracle".to_string(), dataset_name.to_string(), report.ate)];
        return Ok(EvalOutcome { report, summary_rows: rows, grid_entries: None, skipped_queries: 0 });
    }

    let method = config.method.name.as_str().to_string();
    let predictor = match trained {
        TrainedModel::Network(result) => Predictor::Network(&result.model),
        TrainedModel::Baseline(BaselineArtifact::PcaKnn(model)) => Predictor::PcaKnn(model),
        TrainedModel::Baseline(BaselineArtifact::Explicit { landmarks, .. }) => {
            let d_max = match config.obs_config() {
                ObsConfig::Landmarks { d_max } => d_max,
                _ => None,
            };
            Predictor::Explicit { landmarks, d_max }
        }
        TrainedModel::Baseline(BaselineArtifact::MdsOracle { .. }) => unreachable!(),
    };

    // Rigid alignment from a held-out subset of training-trajectory points,
    // reused for every test target.
    let n_align = config.eval.alignment_points.min(graph.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.eval);
    let align_idx = rand::seq::index::sample(&mut rng, graph.len(), n_align);
    let align_feats: Vec<Vec<f64>> =
        align_idx.iter().map(|i| graph.observations()[i].features()).collect();
    let align_pred = predictor.predict(&align_feats)?;
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for (slot, i) in align_idx.iter().enumerate() {
        if let Some(p) = align_pred[slot] {
            src.push(p);
            dst.push(gt[i]);
        }
    }
    if src.len() < 2 {
        return Err(CliError::Eval(EvalError::TooFewPoints(src.len())));
    }
    let transform = rigid_align(&src, &dst, true)?;

    // Test target: random free positions when configured, else the grid.
    let (test_points, test_features) = if config.eval.test_positions > 0 {
        let points = sample_test_points(config, env)?;
        let features = test_observation_features(config, env, &points)?;
        (points, features)
    } else {
        let points = grid_positions(env, config.eval.grid[0], config.eval.grid[1]);
        let features = synthesize_features(env, &config.obs_config(), &points)?;
        (points, features)
    };
    let predictions = predictor.predict(&test_features)?;
    let mut pred_ok = Vec::new();
    let mut gt_ok = Vec::new();
    let mut skipped = 0usize;
    for (p, point) in predictions.iter().zip(&test_points) {
        match p {
            Some(p) => {
                pred_ok.push(*p);
                gt_ok.push(*point);
            }
            None => skipped += 1,
        }
    }
    let report = ate_stats(&pred_ok, &gt_ok, AteAlignment::With(transform))?;

    let mut rows = vec![(
        format!("{method}_aligned"),
        dataset_name.to_string(),
        report.ate,
    )];
    // Methods that predict in absolute coordinates are also scored raw.
    if matches!(
        config.method.name,
        MethodName::Supervised | MethodName::Explicit | MethodName::PcaKnn
    ) {
        let raw = ate_stats(&pred_ok, &gt_ok, AteAlignment::Raw)?;
        rows.push((format!("{method}_raw"), dataset_name.to_string(), raw.ate));
    }
    // Retrieval is additionally scored on its own training queries.
    if let Predictor::PcaKnn(model) = &predictor {
        let train_feats: Vec<Vec<f64>> =
            graph.observations().iter().map(|o| o.features()).collect();
        let train_pred = Predictor::PcaKnn(model).predict(&train_feats)?;
        let pred: Vec<Point2> = train_pred.into_iter().map(|p| p.expect("knn total")).collect();
        let train_report = ate_stats(&pred, gt, AteAlignment::Raw)?;
        rows.push((format!("{method}_train"), dataset_name.to_string(), train_report.ate));
    }

    // Error grid over the requested resolution, with the reused alignment.
    let grid_pts = grid_positions(env, config.eval.grid[0], config.eval.grid[1]);
    let grid_feats = synthesize_features(env, &config.obs_config(), &grid_pts)?;
    let grid_pred = predictor.predict(&grid_feats)?;
    let mut ok_pts = Vec::new();
    let mut ok_pred = ndarray::Array2::zeros((0, 2));
    let mut rows_vec: Vec<[f64; 2]> = Vec::new();
    for (p, point) in grid_pred.iter().zip(&grid_pts) {
        if let Some(p) = p {
            ok_pts.push(*point);
            rows_vec.push(*p);
        }
    }
    if !rows_vec.is_empty() {
        ok_pred = ndarray::Array2::from_shape_fn((rows_vec.len(), 2), |(r, c)| rows_vec[r][c]);
    }
    let entries = error_entries(&ok_pts, &ok_pred, &transform);

    Ok(EvalOutcome {
        report,
        summary_rows: rows,
        grid_entries: Some(entries),
        skipped_queries: skipped,
    })
}

fn sample_test_points(
    config: &ExperimentConfig,
    env: &Environment2D,
) -> Result<Vec<Point2>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.eval);
    rng.set_stream(1);
    let b = env.bounds();
    let mut points = Vec::with_capacity(config.eval.test_positions);
    for _ in 0..config.eval.test_positions {
        let mut found = None;
        for _ in 0..deepgps::collect::RETRY_CAP {
            let p = [rng.random_range(b.xmin..=b.xmax), rng.random_range(b.ymin..=b.ymax)];
            if env.is_free(p) {
                found = Some(p);
                break;
            }
        }
        points.push(found.ok_or(CliError::Collect(
            deepgps::collect::CollectError::RetryExhausted,
        ))?);
    }
    Ok(points)
}

/// Observations at test points: landmark vectors, or scans at headings drawn
/// from the orientation grid.
fn test_observation_features(
    config: &ExperimentConfig,
    env: &Environment2D,
    points: &[Point2],
) -> Result<Vec<Vec<f64>>, CliError> {
    match config.obs_config() {
        ObsConfig::Landmarks { d_max } => points
            .iter()
            .map(|&p| {
                observe_landmarks(env, p, d_max.unwrap_or(f64::INFINITY)).map_err(CliError::from)
            })
            .collect(),
        ObsConfig::Lidar { n_beams, max_range, orientation_grid, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.eval);
            rng.set_stream(2);
            points
                .iter()
                .map(|&p| {
                    let r = rng.random_range(0..orientation_grid);
                    let heading = TAU * r as f64 / orientation_grid as f64;
                    Ok(observe_lidar(env, p, heading, n_beams, max_range)?.features())
                })
                .collect()
        }
    }
}

/// `eval`: load the trained artifact and dataset, evaluate, write the report
/// files.
pub fn cmd_eval(
    config: &ExperimentConfig,
    model_path: &Path,
    dataset: &Path,
    out: &Path,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("eval", config);
    let (graph, _header) = load_dataset(dataset)?;
    let env = resolve_environment(config)?;

    let trained = match config.method.name {
        MethodName::DeepGps | MethodName::Supervised => {
            let (model, state, _) = load_checkpoint(model_path, Some(&config.model.layers))?;
            TrainedModel::Network(TrainResult { model, state, trace: Vec::new() })
        }
        _ => TrainedModel::Baseline(BaselineArtifact::load(model_path)?),
    };

    let t0 = Instant::now();
    let outcome = evaluate(config, &env, &graph, &trained, dataset_label(dataset))?;
    manifest.durations_ms.insert("eval".into(), t0.elapsed().as_millis() as u64);

    save_eval_report(&outcome.report, Some(&config.echo()), &out.join(EVAL_REPORT_FILE))?;
    let file = std::fs::File::create(out.join(ATE_SUMMARY_FILE))?;
    write_ate_summary_csv(std::io::BufWriter::new(file), &outcome.summary_rows)?;
    manifest.artifacts.insert("eval_report".into(), EVAL_REPORT_FILE.into());
    manifest.artifacts.insert("ate_summary".into(), ATE_SUMMARY_FILE.into());
    if let Some(entries) = &outcome.grid_entries {
        let file = std::fs::File::create(out.join(ERROR_GRID_FILE))?;
        write_error_grid_csv(std::io::BufWriter::new(file), entries)?;
        manifest.artifacts.insert("error_grid".into(), ERROR_GRID_FILE.into());
    }
    if outcome.skipped_queries > 0 {
        manifest.notes.insert("skipped_queries".into(), outcome.skipped_queries.into());
    }
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn dataset_label(path: &Path) -> &str {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset")
}

/// Full in-memory pipeline, returning the aligned ATE of the configured
/// evaluation target. Sweep cells run through here.
pub fn run_pipeline_ate(config: &ExperimentConfig) -> Result<AteSummary, CliError> {
    let env = resolve_environment(config)?;
    let graph = collect_graph(config, &env)?;
    run_pipeline_ate_on(config, &env, graph)
}

fn run_pipeline_ate_on(
    config: &ExperimentConfig,
    env: &Environment2D,
    graph: ConstraintGraph,
) -> Result<AteSummary, CliError> {
    let trained = train_on_graph(config, env, &graph)?;
    let outcome = evaluate(config, env, &graph, &trained, "sweep")?;
    Ok(outcome.report.ate)
}

/// `sweep`: run the configured parameter sweep and write `sweep.csv`.
pub fn cmd_sweep(config: &ExperimentConfig, out: &Path) -> Result<RunManifest, CliError> {
    let Some(sweep) = &config.sweep else {
        return Err(CliError::InvalidConfig(
            "sweep: section required for the sweep command".into(),
        ));
    };
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("sweep", config);
    let t0 = Instant::now();

    let table = match sweep {
        SweepSection::Noise { w_values } => {
            // Each cell regenerates labels at its w (identical trajectory
            // seed) and retrains from the same initialization seed.
            noise_sweep(w_values, |w| {
                let mut cell = config.clone();
                cell.noise.w = w;
                cell.sweep = None;
                run_pipeline_ate(&cell).map_err(|e| EvalError::Pipeline(e.to_string()))
            })?
        }
        SweepSection::Samples { n_values } => {
            let env = resolve_environment(config)?;
            let full = collect_graph(config, &env)?;
            let size = full.len();
            sample_count_sweep(n_values, size, |n| {
                let mut cell = config.clone();
                cell.sweep = None;
                // The full-size row is the baseline run itself.
                let graph = if n == size {
                    full.clone()
                } else {
                    truncate_to_sample_count(&full, n, config.seeds.shuffle)
                        .map_err(|e| EvalError::Pipeline(e.to_string()))?
                };
                run_pipeline_ate_on(&cell, &env, graph)
                    .map_err(|e| EvalError::Pipeline(e.to_string()))
            })?
        }
    };

    manifest.durations_ms.insert("sweep".into(), t0.elapsed().as_millis() as u64);
    let file = std::fs::File::create(out.join(SWEEP_FILE))?;
    write_sweep_csv(std::io::BufWriter::new(file), &table)?;
    manifest.artifacts.insert("sweep".into(), SWEEP_FILE.into());
    if !table.regressions.is_empty() {
        manifest.notes.insert(
            "rms_regressions".into(),
            serde_json::to_value(&table.regressions)?,
        );
    }
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Output paths of a full collect/train/eval run in one directory.
pub struct PipelinePaths {
    pub out: PathBuf,
    pub dataset: PathBuf,
    pub model: PathBuf,
}

/// Convenience wrapper running collect, train, and eval into one directory.
pub fn run_full_pipeline(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<PipelinePaths, CliError> {
    cmd_collect(config, out)?;
    let dataset = out.join(DATASET_FILE);
    cmd_train(config, &dataset, out)?;
    let model = out.join(model_artifact_name(config.method.name));
    cmd_eval(config, &model, &dataset, out)?;
    Ok(PipelinePaths { out: out.to_path_buf(), dataset, model })
}
