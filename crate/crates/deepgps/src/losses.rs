//! Objective functions over predicted positions and the batch sampler.
//!
//! The working loss is the normalized pairwise distance term: for a pair of
//! predictions at measured distance `c`, the term is
//! `| ||p_i - p_j|| - c | / ( ||p_i - p_j|| + c )`. It depends only on
//! pairwise distances, so it is invariant under planar isometries of the
//! prediction set but pins the scale. Losses are averaged (not summed) over
//! rows and pairs so the configured learning rates keep their meaning across
//! batch compositions.

use crate::collect::ConstraintGraph;
use crate::env::Point2;
use crate::net::{Batch, BatchRow};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Distances below this are treated as coincident when both the predicted
/// and measured distance vanish.
const ZERO_DISTANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("shape mismatch: {context} expected {expected} rows, got {got}")]
    ShapeMismatch { context: &'static str, expected: usize, got: usize },
    #[error("pair set is empty")]
    EmptyPairSet,
    #[error("batch size must be at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("pair references row {index} outside batch of {rows}")]
    BadPairIndex { index: usize, rows: usize },
}

/// A distance constraint between two rows of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConstraint {
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

/// A scalar loss with its gradient with respect to the predicted positions.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad: Array2<f64>,
    pub pair_count: usize,
}

/// Mean Euclidean distance between predictions and ground truth.
pub fn supervised_loss(pred: &Array2<f64>, gt: &Array2<f64>) -> Result<LossValue, LossError> {
    if pred.dim() != gt.dim() {
        return Err(LossError::ShapeMismatch {
            context: "supervised_loss",
            expected: gt.nrows(),
            got: pred.nrows(),
        });
    }
    let n = pred.nrows();
    if n == 0 {
        return Err(LossError::ShapeMismatch { context: "supervised_loss", expected: 1, got: 0 });
    }
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, 2));
    for r in 0..n {
        let dx = pred[[r, 0]] - gt[[r, 0]];
        let dy = pred[[r, 1]] - gt[[r, 1]];
        let norm = (dx * dx + dy * dy).sqrt();
        value += norm;
        if norm > 0.0 {
            // Subgradient 0 at coincident points.
            grad[[r, 0]] = dx / (norm * n as f64);
            grad[[r, 1]] = dy / (norm * n as f64);
        }
    }
    Ok(LossValue { value: value / n as f64, grad, pair_count: n })
}

/// One normalized pair term and its gradients with respect to both points.
///
/// When both the predicted distance and `c` are below `1e-12` the term is 0
/// with zero gradient; when only the predicted distance vanishes the value is
/// 1 and the direction of steepest descent is undefined, so the subgradient
/// is taken as 0.
pub fn weak_pair_term(pi: Point2, pj: Point2, c: f64) -> (f64, Point2, Point2) {
    let dx = pi[0] - pj[0];
    let dy = pi[1] - pj[1];
    let d = (dx * dx + dy * dy).sqrt();
    if d < ZERO_DISTANCE && c < ZERO_DISTANCE {
        return (0.0, [0.0, 0.0], [0.0, 0.0]);
    }
    let denom = d + c;
    let diff = d - c;
    let term = diff.abs() / denom;
    if d < ZERO_DISTANCE {
        return (term, [0.0, 0.0], [0.0, 0.0]);
    }
    // d(term)/dd = (sign(d-c) * denom - |d-c|) / denom^2, with sign(0) = 0.
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    let dterm_dd = (sign * denom - diff.abs()) / (denom * denom);
    let gx = dterm_dd * dx / d;
    let gy = dterm_dd * dy / d;
    (term, [gx, gy], [-gx, -gy])
}

/// Mean of [`weak_pair_term`] over the supplied pairs, with the gradient
/// accumulated per prediction row.
pub fn dense_segment_loss(
    pred: &Array2<f64>,
    pairs: &[PairConstraint],
) -> Result<LossValue, LossError> {
    if pairs.is_empty() {
        return Err(LossError::EmptyPairSet);
    }
    let n = pred.nrows();
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, 2));
    let scale = 1.0 / pairs.len() as f64;
    for pair in pairs {
        if pair.i >= n || pair.j >= n {
            return Err(LossError::BadPairIndex { index: pair.i.max(pair.j), rows: n });
        }
        let pi = [pred[[pair.i, 0]], pred[[pair.i, 1]]];
        let pj = [pred[[pair.j, 0]], pred[[pair.j, 1]]];
        let (term, gi, gj) = weak_pair_term(pi, pj, pair.c);
        value += term;
        grad[[pair.i, 0]] += gi[0] * scale;
        grad[[pair.i, 1]] += gi[1] * scale;
        grad[[pair.j, 0]] += gj[0] * scale;
        grad[[pair.j, 1]] += gj[1] * scale;
    }
    Ok(LossValue { value: value * scale, grad, pair_count: pairs.len() })
}

/// A differentiable scalar constraint over a pair of predicted positions.
pub trait ConstraintFn {
    /// Value plus gradients with respect to each point.
    fn evaluate(&self, a: Point2, b: Point2) -> (f64, Point2, Point2);
}

/// Euclidean distance between two predicted positions.
pub struct EuclideanDistance;

impl ConstraintFn for EuclideanDistance {
    fn evaluate(&self, a: Point2, b: Point2) -> (f64, Point2, Point2) {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let d = (dx * dx + dy * dy).sqrt();
        if d == 0.0 {
            return (0.0, [0.0, 0.0], [0.0, 0.0]);
        }
        (d, [dx / d, dy / d], [-dx / d, -dy / d])
    }
}

/// Unnormalized constraint-violation loss: the sum over edges of
/// `| constraint(p_i, p_j) - c |`. With the Euclidean constraint this is the
/// un-normalized ancestor of the working loss, kept for ablation.
pub fn generic_constraint_loss<C: ConstraintFn>(
    pred: &Array2<f64>,
    edges: &[PairConstraint],
    constraint: &C,
) -> Result<LossValue, LossError> {
    if edges.is_empty() {
        return Err(LossError::EmptyPairSet);
    }
    let n = pred.nrows();
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, 2));
    for edge in edges {
        if edge.i >= n || edge.j >= n {
            return Err(LossError::BadPairIndex { index: edge.i.max(edge.j), rows: n });
        }
        let a = [pred[[edge.i, 0]], pred[[edge.i, 1]]];
        let b = [pred[[edge.j, 0]], pred[[edge.j, 1]]];
        let (v, ga, gb) = constraint.evaluate(a, b);
        let diff = v - edge.c;
        value += diff.abs();
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[[edge.i, 0]] += sign * ga[0];
        grad[[edge.i, 1]] += sign * ga[1];
        grad[[edge.j, 0]] += sign * gb[0];
        grad[[edge.j, 1]] += sign * gb[1];
    }
    Ok(LossValue { value, grad, pair_count: edges.len() })
}

/// Index plan for one batch: rows to gather and the intra-segment pairs.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub rows: Vec<BatchRow>,
    pub pairs: Vec<PairConstraint>,
}

/// One contiguous run of samples from a segment (a whole segment, or a
/// window of one that exceeds the batch size on its own).
struct Unit {
    segment_id: usize,
    start: usize,
    len: usize,
}

/// Plans one epoch of batches.
///
/// Segments are shuffled, then packed whole into batches until adding the
/// next one would exceed `batch_size`. A segment longer than `batch_size` is
/// split into near-equal contiguous windows first. Pairs connect samples
/// within the same segment (or window), with `c` the absolute arc-label
/// difference. Every segment slot is emitted exactly once per epoch.
pub fn make_batches(
    graph: &ConstraintGraph,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BatchPlan>, LossError> {
    if batch_size < 2 {
        return Err(LossError::BatchTooSmall(batch_size));
    }
    let mut units = Vec::new();
    for (segment_id, segment) in graph.segments().iter().enumerate() {
        let len = segment.samples.len();
        if len <= batch_size {
            units.push(Unit { segment_id, start: 0, len });
        } else {
            let k = len.div_ceil(batch_size);
            let base = len / k;
            let rem = len % k;
            let mut start = 0;
            for w in 0..k {
                let wlen = base + usize::from(w < rem);
                units.push(Unit { segment_id, start, len: wlen });
                start += wlen;
            }
        }
    }
    units.shuffle(rng);

    let mut plans = Vec::new();
    let mut current: Vec<&Unit> = Vec::new();
    let mut current_rows = 0usize;
    let flush = |batch_units: &[&Unit], plans: &mut Vec<BatchPlan>| {
        if batch_units.is_empty() {
            return;
        }
        let mut rows = Vec::new();
        let mut pairs = Vec::new();
        for unit in batch_units {
            let segment = &graph.segments()[unit.segment_id];
            let offset = rows.len();
            for s in unit.start..unit.start + unit.len {
                rows.push(BatchRow {
                    obs_index: segment.samples[s],
                    segment_id: unit.segment_id,
                    arc_label: segment.arc_labels[s],
                });
            }
            for a in 0..unit.len {
                for b in a + 1..unit.len {
                    let la = segment.arc_labels[unit.start + a];
                    let lb = segment.arc_labels[unit.start + b];
                    let mut c = (la - lb).abs();
                    if let Some(noise) = graph.pair_noise() {
                        c = noise.perturb(unit.segment_id, unit.start + a, unit.start + b, c);
                    }
                    pairs.push(PairConstraint { i: offset + a, j: offset + b, c });
                }
            }
        }
        plans.push(BatchPlan { rows, pairs });
    };

    for unit in &units {
        if current_rows + unit.len > batch_size && !current.is_empty() {
            flush(&current, &mut plans);
            current.clear();
            current_rows = 0;
        }
        current_rows += unit.len;
        current.push(unit);
    }
    flush(&current, &mut plans);
    Ok(plans)
}

/// Gathers the feature rows for a plan into a dense batch.
pub fn materialize_batch(graph: &ConstraintGraph, plan: &BatchPlan) -> Batch {
    let dim = graph.feature_dim();
    let mut inputs = Array2::zeros((plan.rows.len(), dim));
    for (r, row) in plan.rows.iter().enumerate() {
        let features = graph.observations()[row.obs_index].features();
        for (c, v) in features.iter().enumerate() {
            inputs[[r, c]] = *v;
        }
    }
    Batch { inputs, rows: plan.rows.clone() }
}

/// Deterministic per-pair odometry noise, keyed by (seed, segment, i, j).
///
/// Used when the graph was collected in per-pair noise mode: arc labels stay
/// noise-free and each derived pair distance gets its own Gaussian
/// perturbation with standard deviation `w * c`, identical across epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNoise {
    pub w: f64,
    pub seed: u64,
}

impl PairNoise {
    pub fn perturb(&self, segment_id: usize, slot_i: usize, slot_j: usize, c: f64) -> f64 {
        if self.w == 0.0 {
            return c;
        }
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(segment_id as u64).to_le_bytes());
        key[16..24].copy_from_slice(&(slot_i as u64).to_le_bytes());
        key[24..32].copy_from_slice(&(slot_j as u64).to_le_bytes());
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(key);
        let z: f64 = rng.sample(StandardNormal);
        (c + self.w * c * z).max(0.0)
    }
}
