//! Evaluation: rigid alignment, trajectory-error statistics, error grids,
//! and the robustness sweep harnesses.
//!
//! Distance-only supervision determines positions up to a planar isometry,
//! so predictions are aligned to ground truth (rotation, translation, and
//! optionally reflection; never scale, which the metric constraints pin)
//! before errors are measured. The alignment is usually estimated once on a
//! held-out subset of training-trajectory points and reused for test grids.

use crate::collect::{observe_landmarks, observe_lidar, ObsConfig};
use crate::env::{dist, Environment2D, Point2};
use crate::net::MlpModel;
use crate::train::predict_features;
use nalgebra::Matrix2;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and ground-truth lengths differ: {pred} vs {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("alignment needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point cloud is degenerate: all points coincide")]
    DegenerateCloud,
    #[error("sweep values must be strictly increasing and nonnegative")]
    BadSweepValues,
    #[error("sweep value {n} exceeds the dataset size {size}")]
    SampleBudgetExceeded { n: usize, size: usize },
    #[error("sweep cell failed: {0}")]
    Pipeline(String),
    #[error("net error: {0}")]
    Net(#[from] crate::net::NetError),
    #[error("collect error: {0}")]
    Collect(#[from] crate::collect::CollectError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A rigid (orthogonal) planar transform: `p -> R p + t` with `R^T R = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    /// Row-major 2x2 orthogonal matrix, determinant +1 or -1.
    pub rotation: [[f64; 2]; 2],
    pub translation: Point2,
}

impl RigidTransform2D {
    pub fn identity() -> Self {
        Self { rotation: [[1.0, 0.0], [0.0, 1.0]], translation: [0.0, 0.0] }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        [
            self.rotation[0][0] * p[0] + self.rotation[0][1] * p[1] + self.translation[0],
            self.rotation[1][0] * p[0] + self.rotation[1][1] * p[1] + self.translation[1],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.rotation[0][0] * self.rotation[1][1] - self.rotation[0][1] * self.rotation[1][0]
    }

    pub fn is_reflection(&self) -> bool {
        self.determinant() < 0.0
    }
}

fn centroid(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

/// Least-squares rigid transform mapping `source` onto `target` (orthogonal
/// Procrustes via SVD of the 2x2 cross-covariance). With `allow_reflection`
/// false the determinant is forced to +1.
pub fn rigid_align(
    source: &[Point2],
    target: &[Point2],
    allow_reflection: bool,
) -> Result<RigidTransform2D, EvalError> {
    if source.len() != target.len() {
        return Err(EvalError::LengthMismatch { pred: source.len(), gt: target.len() });
    }
    if source.len() < 2 {
        return Err(EvalError::TooFewPoints(source.len()));
    }
    let sc = centroid(source);
    let tc = centroid(target);
    let spread = |points: &[Point2], c: Point2| points.iter().any(|p| dist(*p, c) > 0.0);
    if !spread(source, sc) || !spread(target, tc) {
        return Err(EvalError::DegenerateCloud);
    }

    // Cross-covariance H = sum (s - sc)(t - tc)^T; optimal R = V U^T for
    // H = U S V^T.
    let mut h: Matrix2<f64> = Matrix2::zeros();
    for (s, t) in source.iter().zip(target) {
        let ds = [s[0] - sc[0], s[1] - sc[1]];
        let dt = [t[0] - tc[0], t[1] - tc[1]];
        h[(0, 0)] += ds[0] * dt[0];
        h[(0, 1)] += ds[0] * dt[1];
        h[(1, 0)] += ds[1] * dt[0];
        h[(1, 1)] += ds[1] * dt[1];
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("2x2 svd");
    let v_t = svd.v_t.expect("2x2 svd");
    let mut r: Matrix2<f64> = v_t.transpose() * u.transpose();
    if !allow_reflection && r.determinant() < 0.0 {
        // Flip the direction of least singular value (the second column of V).
        let v = v_t.transpose();
        let flipped = Matrix2::from_columns(&[v.column(0).into(), (-v.column(1)).into()]);
        r = flipped * u.transpose();
    }
    let t = [
        tc[0] - (r[(0, 0)] * sc[0] + r[(0, 1)] * sc[1]),
        tc[1] - (r[(1, 0)] * sc[0] + r[(1, 1)] * sc[1]),
    ];
    Ok(RigidTransform2D {
        rotation: [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]],
        translation: t,
    })
}

/// How predictions are brought into the ground-truth frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AteAlignment {
    /// Compare raw predictions.
    Raw,
    /// Fit a fresh rigid alignment (reflection allowed) on these points.
    Fit,
    /// Reuse a transform estimated elsewhere.
    With(RigidTransform2D),
}

/// ATE summary statistics (world units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteSummary {
    pub rms: f64,
    pub median: f64,
    pub max: f64,
}

/// Full evaluation output: the alignment used, summary statistics, and the
/// per-point error vectors (aligned prediction minus ground truth).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub alignment: Option<RigidTransform2D>,
    pub ate: AteSummary,
    pub errors: Vec<Point2>,
    pub n: usize,
}

/// Absolute trajectory error between predictions and ground truth.
///
/// The median uses the lower of the two middle values for even counts.
pub fn ate_stats(
    pred: &[Point2],
    gt: &[Point2],
    align: AteAlignment,
) -> Result<EvalReport, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::TooFewPoints(0));
    }
    let transform = match align {
        AteAlignment::Raw => None,
        AteAlignment::Fit => Some(rigid_align(pred, gt, true)?),
        AteAlignment::With(t) => Some(t),
    };
    let map = |p: Point2| transform.as_ref().map_or(p, |t| t.apply(p));
    let errors: Vec<Point2> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let a = map(*p);
            [a[0] - g[0], a[1] - g[1]]
        })
        .collect();
    let norms: Vec<f64> = errors.iter().map(|e| e[0].hypot(e[1])).collect();
    let ate = summarize(&norms);
    Ok(EvalReport { alignment: transform, ate, errors, n: pred.len() })
}

fn summarize(norms: &[f64]) -> AteSummary {
    let n = norms.len();
    let rms = (norms.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let mut sorted = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(n - 1) / 2];
    let max = *sorted.last().unwrap();
    AteSummary { rms, median, max }
}

/// One cell of an error grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEntry {
    pub position: Point2,
    pub error: Point2,
    pub magnitude: f64,
}

/// Free-space cell centers of an `nx x ny` grid over the environment bounds.
pub fn grid_positions(env: &Environment2D, nx: usize, ny: usize) -> Vec<Point2> {
    let b = env.bounds();
    let dx = b.width() / nx as f64;
    let dy = b.height() / ny as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        for col in 0..nx {
            let p = [b.xmin + (col as f64 + 0.5) * dx, b.ymin + (row as f64 + 0.5) * dy];
            if env.is_free(p) {
                out.push(p);
            }
        }
    }
    out
}

/// Synthesizes the observation features a sensor would capture at each
/// position (lidar scans use heading 0).
pub fn synthesize_features(
    env: &Environment2D,
    obs: &ObsConfig,
    positions: &[Point2],
) -> Result<Vec<Vec<f64>>, EvalError> {
    positions
        .iter()
        .map(|&p| match obs {
            ObsConfig::Landmarks { d_max } => {
                Ok(observe_landmarks(env, p, d_max.unwrap_or(f64::INFINITY))?)
            }
            ObsConfig::Lidar { n_beams, max_range, .. } => {
                Ok(observe_lidar(env, p, 0.0, *n_beams, *max_range)?.features())
            }
        })
        .collect()
}

/// Pairs aligned predictions with their ground-truth grid positions.
pub fn error_entries(
    positions: &[Point2],
    predictions: &Array2<f64>,
    transform: &RigidTransform2D,
) -> Vec<GridEntry> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let aligned = transform.apply([predictions[[i, 0]], predictions[[i, 1]]]);
            let error = [aligned[0] - p[0], aligned[1] - p[1]];
            GridEntry { position: p, error, magnitude: error[0].hypot(error[1]) }
        })
        .collect()
}

/// Evaluates a model over every free cell center of the grid: synthesize the
/// observation, predict, apply the supplied alignment, and record the error
/// vector to ground truth.
pub fn error_grid(
    env: &Environment2D,
    model: &MlpModel,
    resolution: (usize, usize),
    obs: &ObsConfig,
    transform: &RigidTransform2D,
) -> Result<Vec<GridEntry>, EvalError> {
    let positions = grid_positions(env, resolution.0, resolution.1);
    let features = synthesize_features(env, obs, &positions)?;
    let predictions = predict_features(model, &features)?;
    Ok(error_entries(&positions, &predictions, transform))
}

/// A swept parameter with per-value ATE summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub params: Vec<f64>,
    pub rows: Vec<AteSummary>,
    /// Indices whose RMS rose by more than 50% over the previous row
    /// (diagnostic only).
    pub regressions: Vec<usize>,
}

fn flag_regressions(rows: &[AteSummary]) -> Vec<usize> {
    rows.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].rms > 1.5 * w[0].rms)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Runs one full pipeline per noise factor. The caller's closure regenerates
/// labels at the given `w` (same trajectory seed), retrains from the same
/// initialization seed, and evaluates.
pub fn noise_sweep(
    w_values: &[f64],
    mut run: impl FnMut(f64) -> Result<AteSummary, EvalError>,
) -> Result<SweepTable, EvalError> {
    if w_values.is_empty()
        || w_values[0] < 0.0
        || w_values.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(EvalError::BadSweepValues);
    }
    let mut rows = Vec::with_capacity(w_values.len());
    for &w in w_values {
        rows.push(run(w)?);
    }
    Ok(SweepTable { params: w_values.to_vec(), regressions: flag_regressions(&rows), rows })
}

/// Runs one full pipeline per training-set size (shuffled-segment prefixes of
/// the same dataset).
pub fn sample_count_sweep(
    n_values: &[usize],
    dataset_size: usize,
    mut run: impl FnMut(usize) -> Result<AteSummary, EvalError>,
) -> Result<SweepTable, EvalError> {
    if n_values.is_empty() || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EvalError::BadSweepValues);
    }
    if let Some(&n) = n_values.iter().find(|&&n| n > dataset_size) {
        return Err(EvalError::SampleBudgetExceeded { n, size: dataset_size });
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        rows.push(run(n)?);
    }
    Ok(SweepTable {
        params: n_values.iter().map(|&n| n as f64).collect(),
        regressions: flag_regressions(&rows),
        rows,
    })
}

// --- report files ---

/// Nine significant digits, as scientific notation.
pub fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// `ate_summary.csv`: method, dataset, rms, median, max.
pub fn write_ate_summary_csv<W: Write>(
    mut writer: W,
    rows: &[(String, String, AteSummary)],
) -> Result<(), EvalError> {
    writeln!(writer, "method,dataset,rms,median,max")?;
    for (method, dataset, ate) in rows {
        writeln!(
            writer,
            "{method},{dataset},{},{},{}",
            fmt_sig9(ate.rms),
            fmt_sig9(ate.median),
            fmt_sig9(ate.max)
        )?;
    }
    Ok(())
}

/// `error_grid.csv`: x, y, ex, ey, magnitude.
pub fn write_error_grid_csv<W: Write>(
    mut writer: W,
    entries: &[GridEntry],
) -> Result<(), EvalError> {
    writeln!(writer, "x,y,ex,ey,magnitude")?;
    for e in entries {
        writeln!(
            writer,
            "{},{},{},{},{}",
            fmt_sig9(e.position[0]),
            fmt_sig9(e.position[1]),
            fmt_sig9(e.error[0]),
            fmt_sig9(e.error[1]),
            fmt_sig9(e.magnitude)
        )?;
    }
    Ok(())
}

/// `sweep.csv`: param, rms, median, max.
pub fn write_sweep_csv<W: Write>(mut writer: W, table: &SweepTable) -> Result<(), EvalError> {
    writeln!(writer, "param,rms,median,max")?;
    for (param, row) in table.params.iter().zip(&table.rows) {
        writeln!(
            writer,
            "{},{},{},{}",
            fmt_sig9(*param),
            fmt_sig9(row.rms),
            fmt_sig9(row.median),
            fmt_sig9(row.max)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReportDoc<'a> {
    alignment: &'a Option<RigidTransform2D>,
    ate: &'a AteSummary,
    n: usize,
    config: Option<&'a serde_json::Value>,
}

/// Summary-level JSON report (per-point vectors go to the error-grid CSV).
pub fn write_eval_report_json<W: Write>(
    mut writer: W,
    report: &EvalReport,
    config_echo: Option<&serde_json::Value>,
) -> Result<(), EvalError> {
    let doc = EvalReportDoc {
        alignment: &report.alignment,
        ate: &report.ate,
        n: report.n,
        config: config_echo,
    };
    serde_json::to_writer(&mut writer, &doc)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn save_eval_report(
    report: &EvalReport,
    config_echo: Option<&serde_json::Value>,
    path: &Path,
) -> Result<(), EvalError> {
    let file = std::fs::File::create(path)?;
    write_eval_report_json(std::io::BufWriter::new(file), report, config_echo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn apply_iso(points: &[Point2], angle: f64, t: Point2, reflect: bool) -> Vec<Point2> {
        let (c, s) = (angle.cos(), angle.sin());
        points
            .iter()
            .map(|p| {
                let y = if reflect { -p[1] } else { p[1] };
                [c * p[0] - s * y + t[0], s * p[0] + c * y + t[1]]
            })
            .collect()
    }

    fn random_cloud(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect()
    }

    #[test]
    fn identity_alignment_for_identical_clouds() {
        let cloud = random_cloud(20, 1);
        let t = rigid_align(&cloud, &cloud, true).unwrap();
        let report = ate_stats(&cloud, &cloud, AteAlignment::With(t)).unwrap();
        assert!(report.ate.rms < 1e-12);
        assert!(report.ate.max < 1e-12);
    }

    #[test]
    fn known_transform_is_recovered() {
        let source = random_cloud(30, 2);
        let angle = 0.83;
        let translation = [1.5, -0.4];
        let target = apply_iso(&source, angle, translation, false);
        let t = rigid_align(&source, &target, false).unwrap();
        assert!((t.rotation[0][0] - angle.cos()).abs() < 1e-9);
        assert!((t.rotation[1][0] - angle.sin()).abs() < 1e-9);
        assert!((t.translation[0] - translation[0]).abs() < 1e-9);
        assert!((t.translation[1] - translation[1]).abs() < 1e-9);
        assert!(!t.is_reflection());
    }

    #[test]
    fn mirror_needs_reflection() {
        let source = random_cloud(15, 3);
        let target = apply_iso(&source, 0.3, [0.2, 0.1], true);
        let with = ate_stats(&source, &target, AteAlignment::Fit).unwrap();
        assert!(with.ate.rms < 1e-9);
        assert!(with.alignment.unwrap().is_reflection());
        let t = rigid_align(&source, &target, false).unwrap();
        let raw = ate_stats(&source, &target, AteAlignment::With(t)).unwrap();
        assert!(raw.ate.rms > 1e-3);
    }

    #[test]
    fn coincident_cloud_is_degenerate() {
        let cloud = vec![[1.0, 1.0]; 5];
        let target = random_cloud(5, 4);
        assert!(matches!(
            rigid_align(&cloud, &target, true),
            Err(EvalError::DegenerateCloud)
        ));
    }

    #[test]
    fn ate_examples() {
        let gt = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let pred = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 1.0]];
        let report = ate_stats(&pred, &gt, AteAlignment::Raw).unwrap();
        assert_eq!(report.ate.rms, 0.5);
        assert_eq!(report.ate.median, 0.0);
        assert_eq!(report.ate.max, 1.0);
    }

    #[test]
    fn two_points_with_equal_spacing_align_exactly() {
        let pred = vec![[5.0, 5.0], [5.0, 7.0]];
        let gt = vec![[0.0, 0.0], [2.0, 0.0]];
        let report = ate_stats(&pred, &gt, AteAlignment::Fit).unwrap();
        assert!(report.ate.rms < 1e-12);
    }

    #[test]
    fn alignment_is_a_lower_bound_over_random_transforms() {
        let source = random_cloud(25, 5);
        let target = random_cloud(25, 6);
        let best = ate_stats(&source, &target, AteAlignment::Fit).unwrap().ate.rms;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let t = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let reflect = rng.random_range(0..2) == 1;
            let moved = apply_iso(&source, angle, t, reflect);
            let rms = ate_stats(&moved, &target, AteAlignment::Raw).unwrap().ate.rms;
            assert!(rms + 1e-12 >= best, "random transform beat the fit: {rms} < {best}");
        }
    }

    #[test]
    fn grid_positions_count_free_cells() {
        use crate::env::{generate_landmark_env, generate_room_env, Bounds, RoomSpec};
        let env =
            generate_landmark_env(Bounds::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 4, 0).unwrap();
        assert_eq!(grid_positions(&env, 128, 128).len(), 128 * 128);

        let spec = RoomSpec { rows: 16, cols: 16, random_obstacles: 2, ..Default::default() };
        let room = generate_room_env(&spec, 3).unwrap();
        let grid = room.occupancy().unwrap();
        let entries = grid_positions(&room, grid.cols(), grid.rows());
        assert_eq!(entries.len(), grid.free_cell_count());
    }

    #[test]
    fn perfect_predictions_give_zero_error_entries() {
        let positions = random_cloud(40, 8);
        let predictions = Array2::from_shape_fn((40, 2), |(r, c)| positions[r][c]);
        let entries = error_entries(&positions, &predictions, &RigidTransform2D::identity());
        assert!(entries.iter().all(|e| e.magnitude == 0.0));
    }

    #[test]
    fn sweep_validation() {
        assert!(matches!(
            noise_sweep(&[], |_| Ok(AteSummary { rms: 0.0, median: 0.0, max: 0.0 })),
            Err(EvalError::BadSweepValues)
        ));
        assert!(matches!(
            noise_sweep(&[0.1, 0.1], |_| Ok(AteSummary { rms: 0.0, median: 0.0, max: 0.0 })),
            Err(EvalError::BadSweepValues)
        ));
        assert!(matches!(
            sample_count_sweep(&[10, 20], 15, |_| Ok(AteSummary {
                rms: 0.0,
                median: 0.0,
                max: 0.0
            })),
            Err(EvalError::SampleBudgetExceeded { n: 20, size: 15 })
        ));
    }

    #[test]
    fn sweep_flags_regressions() {
        let rows = [
            AteSummary { rms: 0.010, median: 0.01, max: 0.02 },
            AteSummary { rms: 0.011, median: 0.01, max: 0.02 },
            AteSummary { rms: 0.020, median: 0.01, max: 0.02 },
        ];
        let mut it = rows.iter();
        let table = noise_sweep(&[0.0, 0.02, 0.04], |_| Ok(*it.next().unwrap())).unwrap();
        assert_eq!(table.regressions, vec![2]);
    }

    #[test]
    fn csv_headers_and_sig9_format() {
        assert_eq!(fmt_sig9(0.125), "1.25000000e-1");
        let mut buf = Vec::new();
        write_ate_summary_csv(
            &mut buf,
            &[("deepgps".into(), "toy".into(), AteSummary { rms: 0.004, median: 0.004, max: 0.021 })],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,dataset,rms,median,max\n"));
        assert!(text.contains("deepgps,toy,4.00000000e-3,4.00000000e-3,2.10000000e-2"));
    }

    proptest! {
        /// Aligned ATE is invariant under isometries of the predictions.
        #[test]
        fn aligned_ate_is_isometry_invariant(
            seed in 0u64..100,
            angle in 0.0f64..std::f64::consts::TAU,
            tx in -4.0f64..4.0,
            ty in -4.0f64..4.0,
            reflect in proptest::bool::ANY,
        ) {
            let gt = random_cloud(12, seed);
            let pred = random_cloud(12, seed.wrapping_add(1000));
            let base = ate_stats(&pred, &gt, AteAlignment::Fit).unwrap().ate;
            let moved = apply_iso(&pred, angle, [tx, ty], reflect);
            let alt = ate_stats(&moved, &gt, AteAlignment::Fit).unwrap().ate;
            prop_assert!((base.rms - alt.rms).abs() < 1e-9);
            prop_assert!((base.median - alt.median).abs() < 1e-9);
            prop_assert!((base.max - alt.max).abs() < 1e-9);
        }
    }
}
