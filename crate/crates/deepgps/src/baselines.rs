//! Comparison methods: explicit nonlinear-least-squares positioning,
//! classical multidimensional scaling, and PCA+KNN retrieval.
//!
//! Explicit positioning jointly estimates landmark and sensor positions from
//! the stacked range and distance-constraint residuals by Levenberg-
//! Marquardt over the dense normal equations (the Jacobian rows are sparse
//! and accumulated directly). Like the learned method, its solution is
//! determined only up to a planar isometry; evaluation aligns afterwards.

use crate::collect::{ConstraintGraph, Modality};
use crate::env::{dist, Bounds, Point2};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("explicit positioning requires a landmark-modality graph")]
    WrongModality,
    #[error("damping failed to restore positive definite normal equations below the cap")]
    SingularNormalEquations,
    #[error("geometry is degenerate: {0}")]
    DegenerateGeometry(String),
    #[error("initial state has {landmarks} landmarks and {positions} positions, expected {expect_landmarks} and {expect_positions}")]
    BadInit { landmarks: usize, positions: usize, expect_landmarks: usize, expect_positions: usize },
    #[error("distance matrix invalid: {0}")]
    BadEdm(String),
    #[error("requested dimension {dim} exceeds point count {n}")]
    BadDimension { dim: usize, n: usize },
    #[error("pca needs at least 2 rows and 1 <= k <= d, got n {n}, d {d}, k {k}")]
    BadPcaShape { n: usize, d: usize, k: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature length {got} does not match training dimension {expected}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

// --- explicit positioning (Levenberg-Marquardt) ---

/// Joint landmark/position estimate with the residual vector of the last
/// evaluation and the accepted-iterate history of its norm.
#[derive(Debug, Clone)]
pub struct ExplicitState {
    pub landmarks: Vec<Point2>,
    pub positions: Vec<Point2>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl ExplicitState {
    pub fn new(landmarks: Vec<Point2>, positions: Vec<Point2>) -> Self {
        Self { landmarks, positions, residuals: Vec::new(), iterations: 0, residual_history: Vec::new() }
    }

    /// Uniform random initialization over the environment bounds.
    pub fn random(bounds: Bounds, landmarks: usize, positions: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut draw = |n: usize| -> Vec<Point2> {
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(bounds.xmin..=bounds.xmax),
                        rng.random_range(bounds.ymin..=bounds.ymax),
                    ]
                })
                .collect()
        };
        let landmarks = draw(landmarks);
        let positions = draw(positions);
        Self::new(landmarks, positions)
    }

    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Levenberg-Marquardt options. Damping is multiplicative: x10 on a rejected
/// step, /10 on acceptance, starting at 1e-3 and capped at 1e10.
#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iters: usize,
    /// Terminate when the gradient norm drops below this.
    pub tol: f64,
    pub lambda_init: f64,
    pub lambda_cap: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-10, lambda_init: 1e-3, lambda_cap: 1e10 }
    }
}

/// Range observation entries that are unclipped (plus all constraint edges),
/// as flat residual descriptors.
struct ExplicitProblem {
    /// (position index, landmark index, measured range).
    ranges: Vec<(usize, usize, f64)>,
    /// (position i, position j, measured distance).
    edges: Vec<(usize, usize, f64)>,
    n_landmarks: usize,
    n_positions: usize,
}

impl ExplicitProblem {
    fn build(
        graph: &ConstraintGraph,
        n_landmarks: usize,
        d_max: Option<f64>,
    ) -> Result<Self, BaselineError> {
        if graph.modality() != Modality::Landmarks {
            return Err(BaselineError::WrongModality);
        }
        let mut ranges = Vec::new();
        for (i, obs) in graph.observations().iter().enumerate() {
            let crate::collect::Observation::Landmarks(values) = obs else {
                return Err(BaselineError::WrongModality);
            };
            for (k, &x) in values.iter().enumerate() {
                // Clipped readings carry no range information.
                if d_max.is_none_or(|dm| x < dm) {
                    ranges.push((i, k, x));
                }
            }
        }
        let edges = graph.constraint_edges();
        Ok(Self { ranges, edges, n_landmarks, n_positions: graph.len() })
    }

    fn residual_count(&self) -> usize {
        self.ranges.len() + self.edges.len()
    }

    fn n_params(&self) -> usize {
        2 * (self.n_landmarks + self.n_positions)
    }

    /// Parameter layout: landmarks first, then positions, xy-interleaved.
    fn pack(&self, state: &ExplicitState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_params());
        for p in state.landmarks.iter().chain(&state.positions) {
            x.push(p[0]);
            x.push(p[1]);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (Vec<Point2>, Vec<Point2>) {
        let landmarks =
            (0..self.n_landmarks).map(|k| [x[2 * k], x[2 * k + 1]]).collect();
        let base = 2 * self.n_landmarks;
        let positions = (0..self.n_positions)
            .map(|i| [x[base + 2 * i], x[base + 2 * i + 1]])
            .collect();
        (landmarks, positions)
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let base = 2 * self.n_landmarks;
        let mut r = Vec::with_capacity(self.residual_count());
        for &(i, k, measured) in &self.ranges {
            let dx = x[2 * k] - x[base + 2 * i];
            let dy = x[2 * k + 1] - x[base + 2 * i + 1];
            r.push((dx * dx + dy * dy).sqrt() - measured);
        }
        for &(i, j, measured) in &self.edges {
            let dx = x[base + 2 * i] - x[base + 2 * j];
            let dy = x[base + 2 * i + 1] - x[base + 2 * j + 1];
            r.push((dx * dx + dy * dy).sqrt() - measured);
        }
        r
    }

    /// Accumulates the normal equations directly from the sparse Jacobian
    /// rows (4 nonzeros each): `a = J^T J`, `g = J^T r`.
    fn normal_equations(&self, x: &[f64], r: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
        let n = self.n_params();
        let base = 2 * self.n_landmarks;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut g = vec![0.0; n];
        let mut add_row = |cols: [usize; 4], vals: [f64; 4], res: f64| {
            for p in 0..4 {
                if vals[p] == 0.0 {
                    continue;
                }
                g[cols[p]] += vals[p] * res;
                for q in 0..4 {
                    if vals[q] != 0.0 {
                        a[(cols[p], cols[q])] += vals[p] * vals[q];
                    }
                }
            }
        };
        for (row, &(i, k, _)) in self.ranges.iter().enumerate() {
            let dx = x[2 * k] - x[base + 2 * i];
            let dy = x[2 * k + 1] - x[base + 2 * i + 1];
            let d = (dx * dx + dy * dy).sqrt();
            if d == 0.0 {
                continue;
            }
            let (ux, uy) = (dx / d, dy / d);
            add_row(
                [2 * k, 2 * k + 1, base + 2 * i, base + 2 * i + 1],
                [ux, uy, -ux, -uy],
                r[row],
            );
        }
        let offset = self.ranges.len();
        for (row, &(i, j, _)) in self.edges.iter().enumerate() {
            let dx = x[base + 2 * i] - x[base + 2 * j];
            let dy = x[base + 2 * i + 1] - x[base + 2 * j + 1];
            let d = (dx * dx + dy * dy).sqrt();
            if d == 0.0 {
                continue;
            }
            let (ux, uy) = (dx / d, dy / d);
            add_row(
                [base + 2 * i, base + 2 * i + 1, base + 2 * j, base + 2 * j + 1],
                [ux, uy, -ux, -uy],
                r[offset + row],
            );
        }
        (a, g)
    }
}

/// Minimizes the stacked range/constraint residuals by Levenberg-Marquardt
/// from the given initial state. The global isometry gauge is left free;
/// align before comparing to ground truth.
pub fn explicit_solve(
    graph: &ConstraintGraph,
    n_landmarks: usize,
    d_max: Option<f64>,
    init: &ExplicitState,
    opts: &LmOptions,
) -> Result<ExplicitState, BaselineError> {
    let problem = ExplicitProblem::build(graph, n_landmarks, d_max)?;
    if init.landmarks.len() != problem.n_landmarks
        || init.positions.len() != problem.n_positions
    {
        return Err(BaselineError::BadInit {
            landmarks: init.landmarks.len(),
            positions: init.positions.len(),
            expect_landmarks: problem.n_landmarks,
            expect_positions: problem.n_positions,
        });
    }

    let mut x = problem.pack(init);
    let mut r = problem.residuals(&x);
    let mut cost = r.iter().map(|v| v * v).sum::<f64>();
    let mut lambda = opts.lambda_init;
    let mut history = vec![cost.sqrt()];
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        let (a, g) = problem.normal_equations(&x, &r);
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < opts.tol {
            break;
        }
        // Inner damping loop: raise lambda until a positive definite system
        // yields a step that does not increase the residual norm.
        let step = loop {
            let mut damped = a.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += lambda;
            }
            match damped.cholesky() {
                Some(chol) => {
                    let rhs = nalgebra::DVector::from_iterator(g.len(), g.iter().map(|v| -v));
                    let delta = chol.solve(&rhs);
                    let candidate: Vec<f64> =
                        x.iter().zip(delta.iter()).map(|(xi, di)| xi + di).collect();
                    let cand_r = problem.residuals(&candidate);
                    let cand_cost = cand_r.iter().map(|v| v * v).sum::<f64>();
                    if cand_cost <= cost {
                        lambda = (lambda / 10.0).max(1e-12);
                        break Some((candidate, cand_r, cand_cost));
                    }
                }
                None => {}
            }
            lambda *= 10.0;
            if lambda > opts.lambda_cap {
                break None;
            }
        };
        match step {
            Some((new_x, new_r, new_cost)) => {
                x = new_x;
                r = new_r;
                cost = new_cost;
                iterations += 1;
                history.push(cost.sqrt());
            }
            // No acceptable step below the damping cap: either the normal
            // equations cannot be made positive definite, or the iterate is
            // at a numerical stationary point.
            None => {
                if a.clone_owned().cholesky().is_none() && history.len() == 1 {
                    return Err(BaselineError::SingularNormalEquations);
                }
                break;
            }
        }
    }

    let (landmarks, positions) = problem.unpack(&x);
    Ok(ExplicitState { landmarks, positions, residuals: r, iterations, residual_history: history })
}

/// Best-of-`restarts` explicit solve from uniform random initializations,
/// keeping the lowest residual norm.
pub fn explicit_solve_restarts(
    graph: &ConstraintGraph,
    n_landmarks: usize,
    d_max: Option<f64>,
    bounds: Bounds,
    restarts: usize,
    seed: u64,
    opts: &LmOptions,
) -> Result<ExplicitState, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ExplicitState> = None;
    for _ in 0..restarts.max(1) {
        let init = ExplicitState::random(bounds, n_landmarks, graph.len(), &mut rng);
        let solved = explicit_solve(graph, n_landmarks, d_max, &init, opts)?;
        if best.as_ref().is_none_or(|b| solved.residual_norm() < b.residual_norm()) {
            best = Some(solved);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Position from ranges to known landmarks: least squares on the linearized
/// circle-intersection system, then Gauss-Newton refinement of the range
/// residuals. Readings clipped at `d_max` are unusable.
pub fn triangulate(
    landmarks: &[Point2],
    distances: &[f64],
    d_max: Option<f64>,
) -> Result<Point2, BaselineError> {
    let usable: Vec<(Point2, f64)> = landmarks
        .iter()
        .zip(distances)
        .filter(|(_, &d)| d_max.is_none_or(|dm| d < dm))
        .map(|(m, &d)| (*m, d))
        .collect();
    if usable.len() < 3 {
        return Err(BaselineError::DegenerateGeometry(format!(
            "{} usable ranges, need 3",
            usable.len()
        )));
    }
    // Collinearity: smallest singular value of the centered landmark matrix.
    let n = usable.len();
    let cx = usable.iter().map(|(m, _)| m[0]).sum::<f64>() / n as f64;
    let cy = usable.iter().map(|(m, _)| m[1]).sum::<f64>() / n as f64;
    let centered =
        DMatrix::from_fn(n, 2, |r, c| if c == 0 { usable[r].0[0] - cx } else { usable[r].0[1] - cy });
    let svals = centered.singular_values();
    if svals[1] < 1e-9 * svals[0] {
        return Err(BaselineError::DegenerateGeometry("landmarks are collinear".into()));
    }

    // Differenced circle equations against anchor 0:
    // 2 (m_k - m_0) . p = |m_k|^2 - |m_0|^2 - (d_k^2 - d_0^2).
    let (m0, d0) = usable[0];
    let mut ata = [[0.0f64; 2]; 2];
    let mut atb = [0.0f64; 2];
    for &(mk, dk) in &usable[1..] {
        let a = [2.0 * (mk[0] - m0[0]), 2.0 * (mk[1] - m0[1])];
        let b = mk[0] * mk[0] + mk[1] * mk[1] - m0[0] * m0[0] - m0[1] * m0[1]
            - (dk * dk - d0 * d0);
        ata[0][0] += a[0] * a[0];
        ata[0][1] += a[0] * a[1];
        ata[1][0] += a[1] * a[0];
        ata[1][1] += a[1] * a[1];
        atb[0] += a[0] * b;
        atb[1] += a[1] * b;
    }
    let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    if det.abs() < 1e-18 {
        return Err(BaselineError::DegenerateGeometry("linearized system is singular".into()));
    }
    let mut p = [
        (ata[1][1] * atb[0] - ata[0][1] * atb[1]) / det,
        (ata[0][0] * atb[1] - ata[1][0] * atb[0]) / det,
    ];

    // Gauss-Newton on the range residuals.
    for _ in 0..20 {
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for &(m, d) in &usable {
            let dx = p[0] - m[0];
            let dy = p[1] - m[1];
            let range = (dx * dx + dy * dy).sqrt();
            if range == 0.0 {
                continue;
            }
            let r = range - d;
            let (ux, uy) = (dx / range, dy / range);
            jtj[0][0] += ux * ux;
            jtj[0][1] += ux * uy;
            jtj[1][0] += uy * ux;
            jtj[1][1] += uy * uy;
            jtr[0] += ux * r;
            jtr[1] += uy * r;
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-18 {
            break;
        }
        let step = [
            -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det,
            -(jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det,
        ];
        p[0] += step[0];
        p[1] += step[1];
        if step[0].hypot(step[1]) < 1e-14 {
            break;
        }
    }
    Ok(p)
}

// --- classical multidimensional scaling ---

/// Symmetric nonnegative pairwise-distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EdmMatrix {
    d: DMatrix<f64>,
}

impl EdmMatrix {
    pub fn new(d: DMatrix<f64>) -> Result<Self, BaselineError> {
        if d.nrows() != d.ncols() || d.nrows() == 0 {
            return Err(BaselineError::BadEdm(format!(
                "matrix is {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        let scale = 1.0 + d.amax();
        for i in 0..d.nrows() {
            if d[(i, i)] != 0.0 {
                return Err(BaselineError::BadEdm(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..d.ncols() {
                if d[(i, j)] < 0.0 {
                    return Err(BaselineError::BadEdm(format!("entry ({i},{j}) is negative")));
                }
                if (d[(i, j)] - d[(j, i)]).abs() > 1e-12 * scale {
                    return Err(BaselineError::BadEdm(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { d })
    }

    pub fn from_points(points: &[Point2]) -> Self {
        let n = points.len();
        let d = DMatrix::from_fn(n, n, |i, j| dist(points[i], points[j]));
        Self { d }
    }

    pub fn size(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }
}

/// Classical MDS output: coordinates (rows) and the sorted eigenvalues of the
/// double-centered squared-distance matrix.
#[derive(Debug, Clone)]
pub struct MdsSolution {
    pub coords: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// Set when the spectrum says the input is not planar-Euclidean (large
    /// third eigenvalue, or a strongly negative one).
    pub not_euclidean: bool,
}

impl MdsSolution {
    pub fn points_2d(&self) -> Vec<Point2> {
        assert_eq!(self.coords.ncols(), 2, "solution is not 2-dimensional");
        (0..self.coords.nrows()).map(|i| [self.coords[[i, 0]], self.coords[[i, 1]]]).collect()
    }
}

/// Coordinates from a distance matrix: `B = -1/2 J D^(2) J` with `J` the
/// centering matrix, then the top-`dim` eigenvectors scaled by the square
/// roots of their (nonnegative-clamped) eigenvalues.
pub fn classical_mds(edm: &EdmMatrix, dim: usize) -> Result<MdsSolution, BaselineError> {
    let n = edm.size();
    if dim == 0 || dim > n {
        return Err(BaselineError::BadDimension { dim, n });
    }
    // Double centering applied explicitly: b_ij = -1/2 (d2_ij - row_i - col_j + grand).
    let d2 = DMatrix::from_fn(n, n, |i, j| {
        let v = edm.get(i, j);
        v * v
    });
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eigen = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();

    let largest = eigenvalues[0].max(0.0);
    let mut not_euclidean = false;
    if n > 2 && eigenvalues[2] > 1e-6 * largest {
        not_euclidean = true;
    }
    if let Some(&smallest) = eigenvalues.last() {
        if smallest < -1e-6 * largest {
            not_euclidean = true;
        }
    }

    let mut coords = Array2::zeros((n, dim));
    for (c, &idx) in order.iter().take(dim).enumerate() {
        let scale = eigenvalues[c].max(0.0).sqrt();
        let v = eigen.eigenvectors.column(idx);
        for r in 0..n {
            coords[[r, c]] = v[r] * scale;
        }
    }
    Ok(MdsSolution { coords, eigenvalues, not_euclidean })
}

// --- PCA + KNN retrieval ---

/// Mean vector and orthonormal principal directions, descending by explained
/// variance. Direction signs follow a fixed convention (first non-negligible
/// component positive) so fits are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// `k x d`, one direction per row.
    pub components: Vec<Vec<f64>>,
    pub explained: Vec<f64>,
    /// Set when the k-th explained variance is below 1e-12.
    pub rank_deficient: bool,
}

/// Mean-centered covariance eigendecomposition keeping `k` directions.
pub fn pca_fit(data: &Array2<f64>, k: usize) -> Result<PcaBasis, BaselineError> {
    let (n, d) = data.dim();
    if n < 2 || k == 0 || k > d {
        return Err(BaselineError::BadPcaShape { n, d, k });
    }
    let mean: Vec<f64> = (0..d).map(|c| data.column(c).sum() / n as f64).collect();
    let centered = Array2::from_shape_fn((n, d), |(r, c)| data[[r, c]] - mean[c]);
    let cov_nd = centered.t().dot(&centered) / (n as f64 - 1.0);
    let cov = DMatrix::from_fn(d, d, |r, c| cov_nd[[r, c]]);
    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let col = eigen.eigenvectors.column(idx);
        let mut v: Vec<f64> = col.iter().copied().collect();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                for x in &mut v {
                    *x = -*x;
                }
            }
        }
        components.push(v);
        explained.push(eigen.eigenvalues[idx]);
    }
    let rank_deficient = explained[k - 1] < 1e-12;
    Ok(PcaBasis { mean, components, explained, rank_deficient })
}

/// Projects a raw feature row onto the basis.
pub fn pca_project(basis: &PcaBasis, row: &[f64]) -> Result<Vec<f64>, BaselineError> {
    if row.len() != basis.mean.len() {
        return Err(BaselineError::FeatureMismatch { expected: basis.mean.len(), got: row.len() });
    }
    Ok(basis
        .components
        .iter()
        .map(|dir| {
            dir.iter()
                .zip(row)
                .zip(&basis.mean)
                .map(|((w, x), m)| w * (x - m))
                .sum()
        })
        .collect())
}

/// Nearest-neighbor position lookup (k = 1, ties to the lowest index).
pub fn knn_predict(
    train_features: &[Vec<f64>],
    train_positions: &[Point2],
    query: &[f64],
) -> Result<Point2, BaselineError> {
    if train_features.is_empty() || train_features.len() != train_positions.len() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    if train_features[0].len() != query.len() {
        return Err(BaselineError::FeatureMismatch {
            expected: train_features[0].len(),
            got: query.len(),
        });
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, feat) in train_features.iter().enumerate() {
        let d: f64 = feat.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(train_positions[best])
}

/// The appendix retrieval baseline: PCA-reduced features with 1-NN position
/// lookup. Privileged (it stores training positions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaKnnModel {
    pub basis: PcaBasis,
    pub features: Vec<Vec<f64>>,
    pub positions: Vec<Point2>,
}

impl PcaKnnModel {
    pub fn fit(
        raw_features: &[Vec<f64>],
        positions: &[Point2],
        k: usize,
    ) -> Result<Self, BaselineError> {
        if raw_features.is_empty() || raw_features.len() != positions.len() {
            return Err(BaselineError::EmptyTrainingSet);
        }
        let d = raw_features[0].len();
        let data = Array2::from_shape_fn((raw_features.len(), d), |(r, c)| raw_features[r][c]);
        let basis = pca_fit(&data, k)?;
        let features = raw_features
            .iter()
            .map(|row| pca_project(&basis, row))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { basis, features, positions: positions.to_vec() })
    }

    pub fn predict(&self, raw_query: &[f64]) -> Result<Point2, BaselineError> {
        let q = pca_project(&self.basis, raw_query)?;
        knn_predict(&self.features, &self.positions, &q)
    }

    /// Operating memory in float counts: basis plus stored features and
    /// positions.
    pub fn memory_floats(&self) -> usize {
        self.basis.mean.len()
            + self.basis.components.iter().map(|c| c.len()).sum::<usize>()
            + self.basis.explained.len()
            + self.features.iter().map(|f| f.len()).sum::<usize>()
            + self.positions.len() * 2
    }
}

// --- fitted-baseline artifact file ---

/// Serialized state of a fitted baseline, standing in for a network
/// checkpoint when a classical method is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineArtifact {
    Explicit {
        landmarks: Vec<Point2>,
        positions: Vec<Point2>,
        residual_norm: f64,
        iterations: usize,
    },
    MdsOracle { positions: Vec<Point2> },
    PcaKnn(PcaKnnModel),
}

impl BaselineArtifact {
    pub fn write<W: Write>(&self, writer: W) -> Result<(), BaselineError> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, BaselineError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        let file = std::fs::File::create(path)?;
        self.write(BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        let file = std::fs::File::open(path)?;
        Self::read(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collect::{collect_dense, NoiseConfig, ObsConfig, SampleBudget};
    use crate::env::{generate_landmark_env, Environment2D};
    use crate::eval::{ate_stats, AteAlignment};
    use approx::assert_relative_eq;

    fn small_graph() -> (Environment2D, ConstraintGraph) {
        let bounds = Bounds::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let env = Environment2D::new(
            bounds,
            vec![[-0.5, -0.5], [0.6, -0.2], [0.1, 0.7]],
            None,
        )
        .unwrap();
        let graph = collect_dense(
            &env,
            SampleBudget::Positions(4),
            0.4,
            &ObsConfig::Landmarks { d_max: None },
            &NoiseConfig::noiseless(0),
            6,
        )
        .unwrap();
        (env, graph)
    }

    /// Greedy coordinate-descent refinement on the same residuals, used as an
    /// independent optimization oracle.
    fn coordinate_descent(
        graph: &ConstraintGraph,
        n_landmarks: usize,
        init: &ExplicitState,
        sweeps: usize,
    ) -> ExplicitState {
        let problem = ExplicitProblem::build(graph, n_landmarks, None).unwrap();
        let mut x = problem.pack(init);
        let cost = |x: &[f64]| -> f64 {
            problem.residuals(x).iter().map(|r| r * r).sum()
        };
        let mut step = 0.05;
        for _ in 0..sweeps {
            let mut improved = false;
            for i in 0..x.len() {
                let base = cost(&x);
                for delta in [step, -step] {
                    x[i] += delta;
                    if cost(&x) < base {
                        improved = true;
                        break;
                    }
                    x[i] -= delta;
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-9 {
                    break;
                }
            }
        }
        let (landmarks, positions) = problem.unpack(&x);
        let residuals = problem.residuals(&x);
        ExplicitState { landmarks, positions, residuals, iterations: 0, residual_history: vec![] }
    }

    #[test]
    fn ground_truth_init_is_already_optimal() {
        let (env, graph) = small_graph();
        let init = ExplicitState::new(
            env.landmarks().to_vec(),
            graph.ground_truth().unwrap().to_vec(),
        );
        let solved = explicit_solve(&graph, 3, None, &init, &LmOptions::default()).unwrap();
        assert!(solved.iterations <= 2, "took {} iterations", solved.iterations);
        assert!(solved.residual_norm() < 1e-8, "residual {}", solved.residual_norm());
    }

    #[test]
    fn perturbed_init_recovers_ground_truth_and_matches_descent_oracle() {
        let (env, graph) = small_graph();
        let gt_landmarks = env.landmarks().to_vec();
        let gt_positions = graph.ground_truth().unwrap().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut jitter = |points: &[Point2]| -> Vec<Point2> {
            points
                .iter()
                .map(|p| {
                    [
                        p[0] + rng.random_range(-0.05..=0.05),
                        p[1] + rng.random_range(-0.05..=0.05),
                    ]
                })
                .collect()
        };
        let init = ExplicitState::new(jitter(&gt_landmarks), jitter(&gt_positions));

        let solved = explicit_solve(&graph, 3, None, &init, &LmOptions::default()).unwrap();
        assert!(solved.residual_norm() < 1e-9);
        // Compare to truth up to the formulation's gauge.
        let mut all_est = solved.landmarks.clone();
        all_est.extend(&solved.positions);
        let mut all_gt = gt_landmarks.clone();
        all_gt.extend(&gt_positions);
        let report = ate_stats(&all_est, &all_gt, AteAlignment::Fit).unwrap();
        assert!(report.ate.max < 1e-6, "gauge-aligned error {}", report.ate.max);

        // The independent coordinate-descent oracle lands at the same answer.
        let cd = coordinate_descent(&graph, 3, &init, 4000);
        let mut cd_est = cd.landmarks.clone();
        cd_est.extend(&cd.positions);
        let report = ate_stats(&cd_est, &all_gt, AteAlignment::Fit).unwrap();
        assert!(report.ate.max < 1e-4, "descent oracle error {}", report.ate.max);
    }

    #[test]
    fn accepted_steps_never_increase_the_residual() {
        let (_, graph) = small_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bounds = Bounds::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let init = ExplicitState::random(bounds, 3, graph.len(), &mut rng);
        let solved = explicit_solve(&graph, 3, None, &init, &LmOptions::default()).unwrap();
        for w in solved.residual_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "residual rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn residual_length_counts_unclipped_plus_edges() {
        let (_, graph) = small_graph();
        let init = ExplicitState::new(vec![[0.0, 0.0]; 3], vec![[0.1, 0.1]; graph.len()]);
        let solved = explicit_solve(&graph, 3, None, &init, &LmOptions { max_iters: 1, ..Default::default() })
            .unwrap();
        let edges = graph.constraint_edges().len();
        assert_eq!(solved.residuals.len(), 3 * graph.len() + edges);

        // Clipping at a small d_max removes far readings from the residual.
        let clipped = explicit_solve(
            &graph,
            3,
            Some(0.9),
            &init,
            &LmOptions { max_iters: 1, ..Default::default() },
        )
        .unwrap();
        assert!(clipped.residuals.len() < solved.residuals.len());
    }

    /// Closed-form two-circle intersection, disambiguated by a third range.
    fn two_circle_oracle(landmarks: &[Point2], distances: &[f64]) -> Point2 {
        let (a, b) = (landmarks[0], landmarks[1]);
        let (ra, rb) = (distances[0], distances[1]);
        let d = dist(a, b);
        let along = (ra * ra - rb * rb + d * d) / (2.0 * d);
        let h = (ra * ra - along * along).max(0.0).sqrt();
        let ex = [(b[0] - a[0]) / d, (b[1] - a[1]) / d];
        let base = [a[0] + along * ex[0], a[1] + along * ex[1]];
        let c1 = [base[0] - h * ex[1], base[1] + h * ex[0]];
        let c2 = [base[0] + h * ex[1], base[1] - h * ex[0]];
        let err = |p: Point2| (dist(p, landmarks[2]) - distances[2]).abs();
        if err(c1) <= err(c2) {
            c1
        } else {
            c2
        }
    }

    #[test]
    fn triangulation_matches_the_two_circle_oracle() {
        let landmarks = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let truth = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let distances: Vec<f64> = landmarks.iter().map(|m| dist(*m, truth)).collect();
            let got = triangulate(&landmarks, &distances, None).unwrap();
            let oracle = two_circle_oracle(&landmarks, &distances);
            assert!(dist(got, truth) < 1e-9, "triangulate off truth by {}", dist(got, truth));
            assert!(dist(got, oracle) < 1e-9, "disagrees with oracle by {}", dist(got, oracle));
        }
    }

    #[test]
    fn collinear_landmarks_are_degenerate() {
        let landmarks = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.25, 0.25]];
        let err = triangulate(&landmarks, &[1.0, 0.7, 0.5, 0.9], None).unwrap_err();
        assert!(matches!(err, BaselineError::DegenerateGeometry(_)));
    }

    #[test]
    fn fully_clipped_ranges_are_degenerate() {
        let landmarks = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = triangulate(&landmarks, &[0.6, 0.6, 0.6], Some(0.6)).unwrap_err();
        assert!(matches!(err, BaselineError::DegenerateGeometry(_)));
    }

    #[test]
    fn mds_two_points_keep_their_distance() {
        let edm = EdmMatrix::from_points(&[[0.0, 0.0], [1.0, 0.0]]);
        let sol = classical_mds(&edm, 2).unwrap();
        let pts = sol.points_2d();
        assert_relative_eq!(dist(pts[0], pts[1]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mds_reconstructs_the_unit_square_edm() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let edm = EdmMatrix::from_points(&square);
        let sol = classical_mds(&edm, 2).unwrap();
        assert!(!sol.not_euclidean);
        let pts = sol.points_2d();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (dist(pts[i], pts[j]) - edm.get(i, j)).abs() < 1e-9,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn mds_is_idempotent_up_to_rigid_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let points: Vec<Point2> =
            (0..40).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let first = classical_mds(&EdmMatrix::from_points(&points), 2).unwrap().points_2d();
        let second = classical_mds(&EdmMatrix::from_points(&first), 2).unwrap().points_2d();
        let report = ate_stats(&second, &first, AteAlignment::Fit).unwrap();
        assert!(report.ate.rms < 1e-9);
    }

    #[test]
    fn non_planar_inputs_raise_the_flag() {
        // Distances of a regular tetrahedron need three dimensions.
        let mut d = DMatrix::from_element(4, 4, 1.0);
        for i in 0..4 {
            d[(i, i)] = 0.0;
        }
        let edm = EdmMatrix::new(d).unwrap();
        let sol = classical_mds(&edm, 2).unwrap();
        assert!(sol.not_euclidean);
    }

    #[test]
    fn edm_validation_rejects_bad_matrices() {
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 1)] = 1.0;
        d[(1, 0)] = 2.0;
        assert!(matches!(EdmMatrix::new(d), Err(BaselineError::BadEdm(_))));
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 0)] = 0.5;
        assert!(matches!(EdmMatrix::new(d), Err(BaselineError::BadEdm(_))));
    }

    #[test]
    fn edm_from_points_satisfies_the_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Point2> =
            (0..30).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let edm = EdmMatrix::from_points(&points);
        for _ in 0..1000 {
            let i = rng.random_range(0..30);
            let j = rng.random_range(0..30);
            let k = rng.random_range(0..30);
            assert!(edm.get(i, k) <= edm.get(i, j) + edm.get(j, k) + 1e-9);
        }
    }

    #[test]
    fn full_rank_pca_preserves_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = Array2::from_shape_fn((20, 5), |_| rng.random_range(-1.0..1.0));
        let basis = pca_fit(&data, 5).unwrap();
        let rows: Vec<Vec<f64>> =
            (0..20).map(|r| data.row(r).iter().copied().collect()).collect();
        let projected: Vec<Vec<f64>> =
            rows.iter().map(|r| pca_project(&basis, r).unwrap()).collect();
        for i in 0..20 {
            for j in i + 1..20 {
                let raw: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let proj: f64 = projected[i]
                    .iter()
                    .zip(&projected[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!((raw - proj).abs() < 1e-10, "pair ({i},{j}): {raw} vs {proj}");
            }
        }
    }

    #[test]
    fn projection_never_expands_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = Array2::from_shape_fn((30, 8), |_| rng.random_range(-1.0..1.0));
        let basis = pca_fit(&data, 3).unwrap();
        for _ in 0..200 {
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let raw: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let pa = pca_project(&basis, &a).unwrap();
            let pb = pca_project(&basis, &b).unwrap();
            let proj: f64 =
                pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!(proj <= raw + 1e-12);
        }
    }

    #[test]
    fn embedded_line_has_one_dominant_component() {
        let data = Array2::from_shape_fn((15, 3), |(r, c)| {
            let t = r as f64 * 0.3;
            match c {
                0 => 2.0 * t,
                1 => -t,
                _ => 0.5 * t,
            }
        });
        let basis = pca_fit(&data, 3).unwrap();
        assert!(basis.explained[1].abs() < 1e-9);
        assert!(basis.explained[2].abs() < 1e-9);
        assert!(basis.rank_deficient);
    }

    #[test]
    fn knn_examples() {
        let features = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let positions = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        // Exact training query returns its own position.
        assert_eq!(knn_predict(&features, &positions, &[1.0, 0.0]).unwrap(), [10.0, 0.0]);
        // Equidistant tie between indices 1 and 2 goes to the lower index.
        assert_eq!(knn_predict(&features, &positions, &[1.0, 1.0]).unwrap(), [10.0, 0.0]);
        assert!(knn_predict(&[], &[], &[0.0]).is_err());
    }

    #[test]
    fn full_rank_pca_knn_equals_raw_knn() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = 6;
        let features: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let positions: Vec<Point2> =
            (0..40).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let model = PcaKnnModel::fit(&features, &positions, d).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let raw = knn_predict(&features, &positions, &q).unwrap();
            let via_pca = model.predict(&q).unwrap();
            assert_eq!(raw, via_pca);
        }
    }

    #[test]
    fn baseline_artifact_roundtrip() {
        let artifact = BaselineArtifact::MdsOracle {
            positions: vec![[0.0, 1.0], [2.0, -1.0]],
        };
        let mut buf = Vec::new();
        artifact.write(&mut buf).unwrap();
        let back = BaselineArtifact::read(buf.as_slice()).unwrap();
        assert_eq!(artifact, back);
    }
}
