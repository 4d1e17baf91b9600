//! Robot data collection: trajectories, odometry labels, and observations.
//!
//! Both collection strategies walk straight lines and record wheel-encoder
//! arc lengths. The end-point strategy keeps only segment endpoints (interior
//! waypoints are shared by the two segments that meet there); dense sampling
//! records an observation every `spacing` of arc length. Lidar positions may
//! carry several scans at headings drawn from a uniform orientation grid;
//! each drawn heading produces a parallel copy of the trajectory segment so
//! that every constraint pair connects distinct positions.
//!
//! Ground-truth positions ride along in every dataset for evaluation, behind
//! the [`ConstraintGraph::ground_truth`] accessor. The weakly-supervised
//! training path never calls it; only evaluation and the explicitly
//! privileged baselines (supervised regression, MDS oracle, PCA+KNN) do.

use crate::env::{self, dist, Environment2D, Point2};
use crate::losses::PairNoise;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Attempt cap for waypoint and heading resampling.
pub const RETRY_CAP: usize = 1000;

/// Version stamp written into dataset files.
pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error("no clear waypoint or free position found within {RETRY_CAP} attempts")]
    RetryExhausted,
    #[error("no heading admits a step from ({x}, {y}) within {RETRY_CAP} attempts")]
    Stuck { x: f64, y: f64 },
    #[error("end-point collection needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("spacing must be positive and smaller than the free-space extent, got {0}")]
    BadSpacing(f64),
    #[error("noise factor must be nonnegative, got {0}")]
    BadNoiseFactor(f64),
    #[error("orientation sampling needs 1 <= sample <= grid, got sample {sample} of grid {grid}")]
    BadOrientationSample { sample: usize, grid: usize },
    #[error("environment error: {0}")]
    Env(#[from] env::EnvError),
    #[error("constraint graph invalid: {0}")]
    InvalidGraph(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("dataset schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("dataset record error: {0}")]
    BadRecord(String),
}

/// Observation modality tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Landmarks,
    Lidar,
}

/// A single captured observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// Distances to each landmark in landmark-list order, clipped at `d_max`.
    Landmarks(Vec<f64>),
    /// Ordered scan points in the sensor frame. The heading used to generate
    /// the scan is kept for reproducibility but is not part of the features.
    Lidar { points: Vec<Point2>, heading: f64 },
}

impl Observation {
    pub fn modality(&self) -> Modality {
        match self {
            Observation::Landmarks(_) => Modality::Landmarks,
            Observation::Lidar { .. } => Modality::Lidar,
        }
    }

    /// Network input row: the distance vector, or the flattened sensor-frame
    /// coordinates `[x0, y0, x1, y1, ...]` in beam order.
    pub fn features(&self) -> Vec<f64> {
        match self {
            Observation::Landmarks(d) => d.clone(),
            Observation::Lidar { points, .. } => {
                let mut out = Vec::with_capacity(points.len() * 2);
                for p in points {
                    out.push(p[0]);
                    out.push(p[1]);
                }
                out
            }
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Observation::Landmarks(d) => d.len(),
            Observation::Lidar { points, .. } => points.len() * 2,
        }
    }
}

/// One line segment's samples: observation indices in travel order and the
/// wheel-encoder arc length of each sample from the segment start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub samples: Vec<usize>,
    pub arc_labels: Vec<f64>,
}

/// Odometry noise model: Gaussian with standard deviation `w * c` applied to
/// each measured distance `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub w: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: NoiseMode,
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self { w: 0.0, seed, mode: NoiseMode::PerIncrement }
    }
}

/// Where odometry noise enters the labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Perturb each consecutive-sample increment and accumulate into arc
    /// labels, like a wheel encoder integrating noisy ticks.
    #[default]
    PerIncrement,
    /// Keep arc labels noise-free; perturb each derived pair distance with a
    /// deterministic stream keyed by (seed, segment, i, j).
    PerPair,
}

/// Observation capture parameters for the two modalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsConfig {
    Landmarks {
        /// Maximum observing distance; farther landmarks read as `d_max`.
        /// `None` means unlimited.
        d_max: Option<f64>,
    },
    Lidar {
        n_beams: usize,
        max_range: f64,
        /// Size of the uniform orientation grid (headings `2*pi*r / grid`).
        orientation_grid: usize,
        /// Scans captured per position, drawn from the grid without
        /// replacement. Each draw produces a parallel segment copy.
        orientation_samples: usize,
    },
}

impl ObsConfig {
    pub fn modality(&self) -> Modality {
        match self {
            ObsConfig::Landmarks { .. } => Modality::Landmarks,
            ObsConfig::Lidar { .. } => Modality::Lidar,
        }
    }

    fn variants(&self) -> usize {
        match self {
            ObsConfig::Landmarks { .. } => 1,
            ObsConfig::Lidar { orientation_samples, .. } => (*orientation_samples).max(1),
        }
    }
}

/// Dense-sampling stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleBudget {
    /// Stop after this many trajectory segments.
    Segments(usize),
    /// Stop at the first segment end where this many positions are sampled.
    Positions(usize),
}

/// The weak-supervision dataset: observations, line segments with arc-length
/// labels, and the evaluation-only ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGraph {
    observations: Vec<Observation>,
    segments: Vec<SegmentRecord>,
    gt_positions: Option<Vec<Point2>>,
    modality: Modality,
    pair_noise: Option<PairNoise>,
}

impl ConstraintGraph {
    pub fn new(
        observations: Vec<Observation>,
        segments: Vec<SegmentRecord>,
        gt_positions: Option<Vec<Point2>>,
        modality: Modality,
        pair_noise: Option<PairNoise>,
    ) -> Result<Self, CollectError> {
        let graph = Self { observations, segments, gt_positions, modality, pair_noise };
        graph.validate()?;
        Ok(graph)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn pair_noise(&self) -> Option<&PairNoise> {
        self.pair_noise.as_ref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.observations.first().map_or(0, |o| o.feature_dim())
    }

    /// Evaluation-only ground-truth positions. Weakly-supervised training
    /// must not call this; the privileged baselines and the evaluation module
    /// are its only consumers.
    pub fn ground_truth(&self) -> Option<&[Point2]> {
        self.gt_positions.as_deref()
    }

    /// Every intra-segment pair as `(index_i, index_j, c_ij)` with global
    /// observation indices, per-pair noise applied when configured.
    pub fn constraint_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, segment) in self.segments.iter().enumerate() {
            for a in 0..segment.samples.len() {
                for b in a + 1..segment.samples.len() {
                    let mut c = (segment.arc_labels[a] - segment.arc_labels[b]).abs();
                    if let Some(noise) = &self.pair_noise {
                        c = noise.perturb(k, a, b, c);
                    }
                    out.push((segment.samples[a], segment.samples[b], c));
                }
            }
        }
        out
    }

    /// Removes the ground truth, e.g. before publishing a dataset.
    pub fn strip_ground_truth(&mut self) {
        self.gt_positions = None;
    }

    /// Structural checks: labels start at 0 and strictly increase within each
    /// segment, indices are in range, every observation belongs to at least
    /// one segment, and modalities are uniform.
    pub fn validate(&self) -> Result<(), CollectError> {
        let n = self.observations.len();
        if let Some(gt) = &self.gt_positions {
            if gt.len() != n {
                return Err(CollectError::InvalidGraph(format!(
                    "{} ground-truth positions for {} observations",
                    gt.len(),
                    n
                )));
            }
        }
        let dim = self.feature_dim();
        for (i, obs) in self.observations.iter().enumerate() {
            if obs.modality() != self.modality {
                return Err(CollectError::InvalidGraph(format!(
                    "observation {i} does not match the graph modality"
                )));
            }
            if obs.feature_dim() != dim {
                return Err(CollectError::InvalidGraph(format!(
                    "observation {i} has feature dim {} (expected {dim})",
                    obs.feature_dim()
                )));
            }
        }
        let mut referenced = vec![false; n];
        for (k, segment) in self.segments.iter().enumerate() {
            if segment.samples.is_empty() || segment.samples.len() != segment.arc_labels.len() {
                return Err(CollectError::InvalidGraph(format!(
                    "segment {k} has {} samples and {} labels",
                    segment.samples.len(),
                    segment.arc_labels.len()
                )));
            }
            if segment.arc_labels[0] != 0.0 {
                return Err(CollectError::InvalidGraph(format!(
                    "segment {k} labels start at {}, not 0",
                    segment.arc_labels[0]
                )));
            }
            for w in segment.arc_labels.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(CollectError::InvalidGraph(format!(
                        "segment {k} labels are not strictly increasing"
                    )));
                }
            }
            for &s in &segment.samples {
                if s >= n {
                    return Err(CollectError::InvalidGraph(format!(
                        "segment {k} references observation {s} of {n}"
                    )));
                }
                referenced[s] = true;
            }
        }
        if let Some(orphan) = referenced.iter().position(|&r| !r) {
            return Err(CollectError::InvalidGraph(format!(
                "observation {orphan} appears in no segment"
            )));
        }
        Ok(())
    }
}

/// Adds zero-mean Gaussian noise with standard deviation `w * c` to a
/// measured distance, clamped below at 0.
pub fn apply_odometry_noise(c: f64, cfg: &NoiseConfig, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (c + cfg.w * c * z).max(0.0)
}

/// Landmark-distance observation at `p`: entry `k` is
/// `min(|m_k - p|, d_max)` in landmark-list order.
pub fn observe_landmarks(
    environment: &Environment2D,
    p: Point2,
    d_max: f64,
) -> Result<Vec<f64>, CollectError> {
    if environment.landmarks().is_empty() {
        return Err(env::EnvError::NoLandmarks.into());
    }
    Ok(environment
        .landmarks()
        .iter()
        .map(|m| dist(*m, p).min(d_max))
        .collect())
}

/// One lidar scan: beam `j` points along world angle `heading + 2*pi*j/n`,
/// and its hit (or the `max_range` point on a miss) is stored in the sensor
/// frame, which reduces to `range * [cos a_j, sin a_j]`. Worlds without an
/// occupancy grid return all-miss scans.
pub fn observe_lidar(
    environment: &Environment2D,
    p: Point2,
    heading: f64,
    n_beams: usize,
    max_range: f64,
) -> Result<Observation, CollectError> {
    let heading = heading.rem_euclid(TAU);
    let mut points = Vec::with_capacity(n_beams);
    for j in 0..n_beams {
        let beam = TAU * j as f64 / n_beams as f64;
        let range = match environment.occupancy() {
            Some(grid) => {
                let world = heading + beam;
                env::ray_cast(grid, p, [world.cos(), world.sin()], max_range)?
            }
            None => max_range,
        };
        points.push([range * beam.cos(), range * beam.sin()]);
    }
    Ok(Observation::Lidar { points, heading })
}

/// `sample` scans at headings drawn without replacement from the uniform
/// grid `{2*pi*r / grid}`.
pub fn orientation_variants(
    environment: &Environment2D,
    p: Point2,
    grid: usize,
    sample: usize,
    rng: &mut ChaCha8Rng,
    n_beams: usize,
    max_range: f64,
) -> Result<Vec<Observation>, CollectError> {
    if sample == 0 || sample > grid {
        return Err(CollectError::BadOrientationSample { sample, grid });
    }
    let picks = rand::seq::index::sample(rng, grid, sample);
    picks
        .iter()
        .map(|r| observe_lidar(environment, p, TAU * r as f64 / grid as f64, n_beams, max_range))
        .collect()
}

/// Observations captured at one position: a single landmark vector, or the
/// configured number of orientation-sampled scans.
fn capture(
    environment: &Environment2D,
    p: Point2,
    obs: &ObsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Observation>, CollectError> {
    match obs {
        ObsConfig::Landmarks { d_max } => Ok(vec![Observation::Landmarks(observe_landmarks(
            environment,
            p,
            d_max.unwrap_or(f64::INFINITY),
        )?)]),
        ObsConfig::Lidar { n_beams, max_range, orientation_grid, orientation_samples } => {
            orientation_variants(
                environment,
                p,
                *orientation_grid,
                *orientation_samples,
                rng,
                *n_beams,
                *max_range,
            )
        }
    }
}

fn sample_free_position(
    environment: &Environment2D,
    rng: &mut ChaCha8Rng,
) -> Result<Point2, CollectError> {
    let b = environment.bounds();
    for _ in 0..RETRY_CAP {
        let p = [
            rng.random_range(b.xmin..=b.xmax),
            rng.random_range(b.ymin..=b.ymax),
        ];
        if environment.is_free(p) {
            return Ok(p);
        }
    }
    Err(CollectError::RetryExhausted)
}

/// Accumulates positions and observations while assembling a graph.
struct GraphBuilder<'a> {
    environment: &'a Environment2D,
    obs: &'a ObsConfig,
    observations: Vec<Observation>,
    gt: Vec<Point2>,
    segments: Vec<SegmentRecord>,
}

impl<'a> GraphBuilder<'a> {
    fn new(environment: &'a Environment2D, obs: &'a ObsConfig) -> Self {
        Self { environment, obs, observations: Vec::new(), gt: Vec::new(), segments: Vec::new() }
    }

    /// Captures observations at `p`; returns the base index of its variants.
    fn add_position(&mut self, p: Point2, rng: &mut ChaCha8Rng) -> Result<usize, CollectError> {
        let base = self.observations.len();
        for obs in capture(self.environment, p, self.obs, rng)? {
            self.observations.push(obs);
            self.gt.push(p);
        }
        Ok(base)
    }

    /// Emits one trajectory segment as `variants` parallel copies sharing the
    /// same arc labels.
    fn add_segment(&mut self, bases: &[usize], labels: &[f64]) {
        let variants = self.obs.variants();
        for v in 0..variants {
            self.segments.push(SegmentRecord {
                samples: bases.iter().map(|&b| b + v).collect(),
                arc_labels: labels.to_vec(),
            });
        }
    }

    fn finish(
        self,
        modality: Modality,
        noise: &NoiseConfig,
    ) -> Result<ConstraintGraph, CollectError> {
        let pair_noise = match noise.mode {
            NoiseMode::PerPair if noise.w > 0.0 => {
                Some(PairNoise { w: noise.w, seed: noise.seed })
            }
            _ => None,
        };
        ConstraintGraph::new(self.observations, self.segments, Some(self.gt), modality, pair_noise)
    }
}

/// End-point collection: the robot visits `n` random clear waypoints in
/// sequence, observing at each, and records the measured straight-line
/// distance of every hop as a two-sample segment. Interior waypoints belong
/// to both adjacent segments.
pub fn collect_endpoint(
    environment: &Environment2D,
    n: usize,
    obs: &ObsConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<ConstraintGraph, CollectError> {
    if n < 2 {
        return Err(CollectError::TooFewWaypoints(n));
    }
    if noise.w < 0.0 {
        return Err(CollectError::BadNoiseFactor(noise.w));
    }
    let mut traj = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut builder = GraphBuilder::new(environment, obs);

    let mut waypoints = Vec::with_capacity(n);
    let mut bases = Vec::with_capacity(n);
    let first = sample_free_position(environment, &mut traj)?;
    bases.push(builder.add_position(first, &mut traj)?);
    waypoints.push(first);
    for _ in 1..n {
        let prev = *waypoints.last().unwrap();
        let mut accepted = None;
        for _ in 0..RETRY_CAP {
            let b = environment.bounds();
            let cand = [
                traj.random_range(b.xmin..=b.xmax),
                traj.random_range(b.ymin..=b.ymax),
            ];
            if environment.is_free(cand) && environment.segment_clear(prev, cand)? {
                accepted = Some(cand);
                break;
            }
        }
        let wp = accepted.ok_or(CollectError::RetryExhausted)?;
        bases.push(builder.add_position(wp, &mut traj)?);
        waypoints.push(wp);
    }

    for i in 0..n - 1 {
        let true_dist = dist(waypoints[i], waypoints[i + 1]);
        let label = match noise.mode {
            NoiseMode::PerIncrement => apply_odometry_noise(true_dist, noise, &mut noise_rng),
            NoiseMode::PerPair => true_dist,
        };
        builder.add_segment(&[bases[i], bases[i + 1]], &[0.0, label]);
    }
    builder.finish(obs.modality(), noise)
}

/// Dense-sampling collection: from a random free start, the robot walks along
/// a random heading sampling every `spacing` of arc length until the next
/// step would leave the bounds or hit an obstacle, then turns to a fresh
/// random heading from where it stopped.
pub fn collect_dense(
    environment: &Environment2D,
    budget: SampleBudget,
    spacing: f64,
    obs: &ObsConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<ConstraintGraph, CollectError> {
    let b = environment.bounds();
    if !(spacing > 0.0) || spacing >= b.width().min(b.height()) {
        return Err(CollectError::BadSpacing(spacing));
    }
    if noise.w < 0.0 {
        return Err(CollectError::BadNoiseFactor(noise.w));
    }
    let mut traj = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut builder = GraphBuilder::new(environment, obs);

    let mut cur = sample_free_position(environment, &mut traj)?;
    let mut positions_done = 0usize;
    let mut segments_done = 0usize;
    loop {
        // A heading must admit at least one step.
        let mut dir = None;
        for _ in 0..RETRY_CAP {
            let phi = traj.random_range(0.0..TAU);
            let d = [phi.cos(), phi.sin()];
            let next = [cur[0] + d[0] * spacing, cur[1] + d[1] * spacing];
            if b.contains(next) && environment.segment_clear(cur, next)? {
                dir = Some(d);
                break;
            }
        }
        let dir = dir.ok_or(CollectError::Stuck { x: cur[0], y: cur[1] })?;

        // Walk: sample i sits at arc length i * spacing from the start.
        let start = cur;
        let mut positions = vec![start];
        loop {
            let i = positions.len() as f64;
            let next = [start[0] + dir[0] * i * spacing, start[1] + dir[1] * i * spacing];
            if !b.contains(next) || !environment.segment_clear(*positions.last().unwrap(), next)? {
                break;
            }
            positions.push(next);
        }

        let labels: Vec<f64> = match noise.mode {
            NoiseMode::PerIncrement if noise.w > 0.0 => {
                let mut cum = 0.0;
                let mut out = vec![0.0];
                for _ in 1..positions.len() {
                    cum += apply_odometry_noise(spacing, noise, &mut noise_rng);
                    out.push(cum);
                }
                out
            }
            _ => (0..positions.len()).map(|i| i as f64 * spacing).collect(),
        };

        let mut bases = Vec::with_capacity(positions.len());
        for &p in &positions {
            bases.push(builder.add_position(p, &mut traj)?);
        }
        builder.add_segment(&bases, &labels);

        cur = *positions.last().unwrap();
        positions_done += positions.len();
        segments_done += 1;
        let done = match budget {
            SampleBudget::Segments(l) => segments_done >= l,
            SampleBudget::Positions(p) => positions_done >= p,
        };
        if done {
            break;
        }
    }
    builder.finish(obs.modality(), noise)
}

/// Shuffled-segment prefix of a dataset with (up to) `n` observations, for
/// sample-count sweeps. Whole segments are taken in shuffled order; the last
/// segment is truncated to land on `n` and dropped if fewer than 2 samples
/// would remain. Copies the observations it keeps and reindexes.
pub fn truncate_to_sample_count(
    graph: &ConstraintGraph,
    n: usize,
    seed: u64,
) -> Result<ConstraintGraph, CollectError> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..graph.segments.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut observations = Vec::new();
    let mut gt = graph.gt_positions.as_ref().map(|_| Vec::new());
    let mut segments = Vec::new();
    let mut remap: Vec<Option<usize>> = vec![None; graph.observations.len()];
    for &k in &order {
        let segment = &graph.segments[k];
        let room = n.saturating_sub(observations.len());
        if room < 2 {
            // No valid segment (at least 2 samples) fits; stop at n or n-1.
            break;
        }
        let take = segment.samples.len().min(room);
        let mut samples = Vec::with_capacity(take);
        for &s in &segment.samples[..take] {
            let idx = match remap[s] {
                Some(idx) => idx,
                None => {
                    let idx = observations.len();
                    observations.push(graph.observations[s].clone());
                    if let (Some(gt), Some(src)) = (gt.as_mut(), graph.gt_positions.as_ref()) {
                        gt.push(src[s]);
                    }
                    remap[s] = Some(idx);
                    idx
                }
            };
            samples.push(idx);
        }
        segments.push(SegmentRecord { samples, arc_labels: segment.arc_labels[..take].to_vec() });
        if observations.len() >= n {
            break;
        }
    }
    ConstraintGraph::new(observations, segments, gt, graph.modality, graph.pair_noise)
}

// --- dataset file (JSON lines) ---

#[derive(Serialize, Deserialize)]
struct DatasetHeaderDoc {
    schema_version: u32,
    modality: Modality,
    env_reference: Option<String>,
    config: Option<serde_json::Value>,
    seed: Option<u64>,
    n: usize,
    l: usize,
    pair_noise: Option<PairNoiseDoc>,
    segments: Vec<SegmentRecord>,
}

#[derive(Serialize, Deserialize)]
struct PairNoiseDoc {
    w: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ObservationRecord {
    index: usize,
    segment_id: usize,
    arc_label: f64,
    obs: Observation,
    gt: Option<Point2>,
}

/// Dataset header metadata (everything except the graph itself).
#[derive(Debug, Clone)]
pub struct DatasetHeader {
    pub env_reference: Option<String>,
    pub config: Option<serde_json::Value>,
    pub seed: Option<u64>,
}

/// Writes a dataset: one JSON header line carrying the segment table, then
/// one record per observation with its primary (first) segment membership.
pub fn write_dataset<W: Write>(
    graph: &ConstraintGraph,
    header: &DatasetHeader,
    mut writer: W,
) -> Result<(), CollectError> {
    let doc = DatasetHeaderDoc {
        schema_version: DATASET_SCHEMA_VERSION,
        modality: graph.modality,
        env_reference: header.env_reference.clone(),
        config: header.config.clone(),
        seed: header.seed,
        n: graph.observations.len(),
        l: graph.segments.len(),
        pair_noise: graph.pair_noise.map(|p| PairNoiseDoc { w: p.w, seed: p.seed }),
        segments: graph.segments.clone(),
    };
    serde_json::to_writer(&mut writer, &doc)?;
    writer.write_all(b"\n")?;

    // Primary membership: first (segment, slot) that references each index.
    let mut primary: Vec<Option<(usize, f64)>> = vec![None; graph.observations.len()];
    for (k, segment) in graph.segments.iter().enumerate() {
        for (slot, &s) in segment.samples.iter().enumerate() {
            if primary[s].is_none() {
                primary[s] = Some((k, segment.arc_labels[slot]));
            }
        }
    }
    for (index, obs) in graph.observations.iter().enumerate() {
        let (segment_id, arc_label) = primary[index].expect("validated: no orphans");
        let record = ObservationRecord {
            index,
            segment_id,
            arc_label,
            obs: obs.clone(),
            gt: graph.gt_positions.as_ref().map(|gt| gt[index]),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a dataset written by [`write_dataset`], validating the records
/// against the header's segment table.
pub fn read_dataset<R: Read>(reader: R) -> Result<(ConstraintGraph, DatasetHeader), CollectError> {
    let mut lines = BufReader::new(reader).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| CollectError::BadRecord("empty dataset file".into()))??;
    let doc: DatasetHeaderDoc = serde_json::from_str(&header_line)?;
    if doc.schema_version != DATASET_SCHEMA_VERSION {
        return Err(CollectError::SchemaVersion {
            found: doc.schema_version,
            expected: DATASET_SCHEMA_VERSION,
        });
    }
    let mut observations: Vec<Option<Observation>> = vec![None; doc.n];
    let mut gts: Vec<Option<Point2>> = vec![None; doc.n];
    let mut any_gt = false;
    let mut count = 0usize;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record: ObservationRecord = serde_json::from_str(&line)?;
        if record.index >= doc.n {
            return Err(CollectError::BadRecord(format!(
                "record index {} out of range {}",
                record.index, doc.n
            )));
        }
        if observations[record.index].is_some() {
            return Err(CollectError::BadRecord(format!(
                "duplicate record for index {}",
                record.index
            )));
        }
        let segment = doc.segments.get(record.segment_id).ok_or_else(|| {
            CollectError::BadRecord(format!("record {} names segment {}", record.index, record.segment_id))
        })?;
        let slot = segment.samples.iter().position(|&s| s == record.index).ok_or_else(|| {
            CollectError::BadRecord(format!(
                "record {} is not a sample of segment {}",
                record.index, record.segment_id
            ))
        })?;
        if segment.arc_labels[slot] != record.arc_label {
            return Err(CollectError::BadRecord(format!(
                "record {} arc label disagrees with the segment table",
                record.index
            )));
        }
        observations[record.index] = Some(record.obs);
        if let Some(gt) = record.gt {
            gts[record.index] = Some(gt);
            any_gt = true;
        }
        count += 1;
    }
    if count != doc.n {
        return Err(CollectError::BadRecord(format!(
            "header declares {} observations, file has {count}",
            doc.n
        )));
    }
    let observations: Vec<Observation> =
        observations.into_iter().map(|o| o.expect("counted")).collect();
    let gt_positions = if any_gt {
        let all: Option<Vec<Point2>> = gts.into_iter().collect();
        Some(all.ok_or_else(|| {
            CollectError::BadRecord("ground truth present on some records but not all".into())
        })?)
    } else {
        None
    };
    let graph = ConstraintGraph::new(
        observations,
        doc.segments,
        gt_positions,
        doc.modality,
        doc.pair_noise.map(|p| PairNoise { w: p.w, seed: p.seed }),
    )?;
    Ok((
        graph,
        DatasetHeader { env_reference: doc.env_reference, config: doc.config, seed: doc.seed },
    ))
}

pub fn save_dataset(
    graph: &ConstraintGraph,
    header: &DatasetHeader,
    path: &Path,
) -> Result<(), CollectError> {
    let file = std::fs::File::create(path)?;
    write_dataset(graph, header, BufWriter::new(file))
}

pub fn load_dataset(path: &Path) -> Result<(ConstraintGraph, DatasetHeader), CollectError> {
    let file = std::fs::File::open(path)?;
    read_dataset(BufReader::new(file))
}
