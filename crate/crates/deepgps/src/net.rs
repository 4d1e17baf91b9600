//! From-scratch differentiable MLP with Adam optimization.
//!
//! The network is a fixed stack of affine layers with rectified-linear hidden
//! activations and a linear 2D output, stored as 64-bit floats. Reverse-mode
//! gradients are computed against a cache captured during the forward pass;
//! there is no general autodiff graph.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Version stamp written into checkpoint files.
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("dimension mismatch: {context} expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },
    #[error("layer sizes must list at least input and output, got {0} entries")]
    TooFewLayers(usize),
    #[error("output layer must have 2 units for planar positions, got {0}")]
    BadOutputDim(usize),
    #[error("layer sizes must be positive")]
    ZeroWidthLayer,
    #[error("forward cache does not match this model")]
    StaleCache,
    #[error("checkpoint schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint header parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Hidden-layer activation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// The position-regression network: per-layer weights `(fan_in x fan_out)`
/// and biases, plus the activation tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
}

/// First/second-moment buffers mirroring the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_weights: Vec<Array2<f64>>,
    v_weights: Vec<Array2<f64>>,
    m_biases: Vec<Array1<f64>>,
    v_biases: Vec<Array1<f64>>,
    step: u64,
    hyper: AdamHyper,
}

/// Activations captured by [`MlpModel::forward`], consumed by [`backward`].
#[derive(Debug)]
pub struct ForwardCache {
    /// Input to each layer: `inputs[0]` is the batch, `inputs[l]` the
    /// post-activation output of layer `l - 1`.
    inputs: Vec<Array2<f64>>,
}

/// Parameter gradients in model order.
#[derive(Debug)]
pub struct Gradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

/// One row of training input plus the metadata the loss needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRow {
    pub obs_index: usize,
    pub segment_id: usize,
    pub arc_label: f64,
}

/// A training batch: `(rows x input_dim)` features and per-row metadata.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub rows: Vec<BatchRow>,
}

impl MlpModel {
    /// Initializes weights from a zero-mean uniform distribution with
    /// variance `2 / fan_in` (bound `sqrt(6 / fan_in)`); biases start at
    /// zero. Deterministic per seed.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self, NetError> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for win in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-bound..=bound)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self { layer_sizes: layer_sizes.to_vec(), weights, biases, activation })
    }

    /// Builds a model from explicit parameters (used by tests and loading).
    pub fn from_parameters(
        layer_sizes: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activation: Activation,
    ) -> Result<Self, NetError> {
        validate_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(NetError::SchemaMismatch("parameter list length".into()));
        }
        for (l, win) in layer_sizes.windows(2).enumerate() {
            if weights[l].dim() != (win[0], win[1]) || biases[l].len() != win[1] {
                return Err(NetError::SchemaMismatch(format!("layer {l} parameter shape")));
            }
        }
        Ok(Self { layer_sizes, weights, biases, activation })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Total parameter count (weights plus biases).
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Forward pass returning predicted positions and the activation cache.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NetError> {
        if inputs.ncols() != self.input_dim() {
            return Err(NetError::DimensionMismatch {
                context: "forward input columns",
                expected: self.input_dim(),
                got: inputs.ncols(),
            });
        }
        let layers = self.weights.len();
        let mut cache = Vec::with_capacity(layers);
        let mut x = inputs.clone();
        for l in 0..layers {
            let mut z = x.dot(&self.weights[l]);
            z += &self.biases[l];
            cache.push(x);
            if l + 1 < layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        Ok((x, ForwardCache { inputs: cache }))
    }

    /// Forward pass without caching, for inference.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Array2<f64>, NetError> {
        self.forward(inputs).map(|(y, _)| y)
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<(), NetError> {
    if layer_sizes.len() < 2 {
        return Err(NetError::TooFewLayers(layer_sizes.len()));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(NetError::ZeroWidthLayer);
    }
    let out = *layer_sizes.last().unwrap();
    if out != 2 {
        return Err(NetError::BadOutputDim(out));
    }
    Ok(())
}

/// Reverse-mode gradients of the scalar loss whose output gradient is
/// `output_gradient`, using the cache produced by the matching forward call.
pub fn backward(
    model: &MlpModel,
    cache: &ForwardCache,
    output_gradient: &Array2<f64>,
) -> Result<Gradients, NetError> {
    let layers = model.weights.len();
    if cache.inputs.len() != layers {
        return Err(NetError::StaleCache);
    }
    let batch = cache.inputs[0].nrows();
    if output_gradient.nrows() != batch || output_gradient.ncols() != model.layer_sizes[layers] {
        return Err(NetError::StaleCache);
    }
    for (l, input) in cache.inputs.iter().enumerate() {
        if input.ncols() != model.layer_sizes[l] || input.nrows() != batch {
            return Err(NetError::StaleCache);
        }
    }

    let mut d_weights = vec![Array2::zeros((0, 0)); layers];
    let mut d_biases = vec![Array1::zeros(0); layers];
    let mut grad = output_gradient.clone();
    for l in (0..layers).rev() {
        let x = &cache.inputs[l];
        d_weights[l] = x.t().dot(&grad);
        d_biases[l] = grad.sum_axis(Axis(0));
        if l > 0 {
            let mut gx = grad.dot(&model.weights[l].t());
            // Rectifier mask: x is the post-activation input to layer l, so
            // x > 0 exactly where the pre-activation was positive. The
            // subgradient at 0 is taken as 0.
            gx.zip_mut_with(x, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            grad = gx;
        }
    }
    Ok(Gradients { d_weights, d_biases })
}

impl AdamState {
    pub fn new(model: &MlpModel, hyper: AdamHyper) -> Self {
        Self {
            m_weights: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_weights: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            step: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn hyper(&self) -> AdamHyper {
        self.hyper
    }
}

/// One Adam update with bias correction; increments the step counter.
pub fn adam_step(
    model: &mut MlpModel,
    state: &mut AdamState,
    grads: &Gradients,
    lr: f64,
) -> Result<(), NetError> {
    let layers = model.weights.len();
    if grads.d_weights.len() != layers || grads.d_biases.len() != layers {
        return Err(NetError::StaleCache);
    }
    for l in 0..layers {
        if grads.d_weights[l].dim() != model.weights[l].dim()
            || grads.d_biases[l].len() != model.biases[l].len()
        {
            return Err(NetError::StaleCache);
        }
    }
    state.step += 1;
    let AdamHyper { beta1, beta2, epsilon } = state.hyper;
    let t = state.step as i32;
    let corr1 = 1.0 - beta1.powi(t);
    let corr2 = 1.0 - beta2.powi(t);

    let update = |param: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *param -= lr * m_hat / (v_hat.sqrt() + epsilon);
    };

    for l in 0..layers {
        let w = model.weights[l].as_slice_mut().expect("contiguous weights");
        let m = state.m_weights[l].as_slice_mut().expect("contiguous moments");
        let v = state.v_weights[l].as_slice_mut().expect("contiguous moments");
        let g = grads.d_weights[l].as_slice().expect("contiguous gradients");
        for i in 0..w.len() {
            update(&mut w[i], &mut m[i], &mut v[i], g[i]);
        }
        let b = model.biases[l].as_slice_mut().expect("contiguous biases");
        let mb = state.m_biases[l].as_slice_mut().expect("contiguous moments");
        let vb = state.v_biases[l].as_slice_mut().expect("contiguous moments");
        let gb = grads.d_biases[l].as_slice().expect("contiguous gradients");
        for i in 0..b.len() {
            update(&mut b[i], &mut mb[i], &mut vb[i], gb[i]);
        }
    }
    Ok(())
}

// --- checkpoint file ---

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    schema_version: u32,
    layer_sizes: Vec<usize>,
    activation: Activation,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    /// Training configuration echo, opaque to the loader.
    train_config: Option<serde_json::Value>,
}

/// Writes model and optimizer state: a one-line JSON header followed by raw
/// little-endian f64 arrays (per layer weights then bias, then all first
/// moments, then all second moments in the same order).
pub fn write_checkpoint<W: Write>(
    model: &MlpModel,
    state: &AdamState,
    train_config: Option<&serde_json::Value>,
    mut writer: W,
) -> Result<(), NetError> {
    let header = CheckpointHeader {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        layer_sizes: model.layer_sizes.clone(),
        activation: model.activation,
        step: state.step,
        beta1: state.hyper.beta1,
        beta2: state.hyper.beta2,
        epsilon: state.hyper.epsilon,
        train_config: train_config.cloned(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;

    let mut write_array = |values: &[f64]| -> Result<(), NetError> {
        for v in values {
            writer.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    for l in 0..model.weights.len() {
        write_array(model.weights[l].as_slice().expect("contiguous"))?;
        write_array(model.biases[l].as_slice().expect("contiguous"))?;
    }
    for l in 0..model.weights.len() {
        write_array(state.m_weights[l].as_slice().expect("contiguous"))?;
        write_array(state.m_biases[l].as_slice().expect("contiguous"))?;
    }
    for l in 0..model.weights.len() {
        write_array(state.v_weights[l].as_slice().expect("contiguous"))?;
        write_array(state.v_biases[l].as_slice().expect("contiguous"))?;
    }
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`]. When `expect_sizes`
/// is given, a differing architecture is rejected as a schema mismatch.
pub fn read_checkpoint<R: Read>(
    mut reader: R,
    expect_sizes: Option<&[usize]>,
) -> Result<(MlpModel, AdamState, Option<serde_json::Value>), NetError> {
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(NetError::SchemaMismatch("missing header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(NetError::SchemaMismatch(format!(
            "schema version {} (expected {})",
            header.schema_version, CHECKPOINT_SCHEMA_VERSION
        )));
    }
    if let Some(expect) = expect_sizes {
        if expect != header.layer_sizes.as_slice() {
            return Err(NetError::SchemaMismatch(format!(
                "layer sizes {:?} (expected {:?})",
                header.layer_sizes, expect
            )));
        }
    }
    validate_sizes(&header.layer_sizes).map_err(|e| NetError::SchemaMismatch(e.to_string()))?;

    let mut read_array = |len: usize| -> Result<Vec<f64>, NetError> {
        let mut buf = vec![0u8; len * 8];
        reader.read_exact(&mut buf).map_err(|_| {
            NetError::SchemaMismatch("checkpoint truncated".into())
        })?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };

    let dims: Vec<(usize, usize)> =
        header.layer_sizes.windows(2).map(|w| (w[0], w[1])).collect();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for &(fi, fo) in &dims {
        let w = read_array(fi * fo)?;
        weights.push(Array2::from_shape_vec((fi, fo), w).expect("shape"));
        biases.push(Array1::from_vec(read_array(fo)?));
    }
    let mut read_moments = || -> Result<(Vec<Array2<f64>>, Vec<Array1<f64>>), NetError> {
        let mut mw = Vec::new();
        let mut mb = Vec::new();
        for &(fi, fo) in &dims {
            mw.push(Array2::from_shape_vec((fi, fo), read_array(fi * fo)?).expect("shape"));
            mb.push(Array1::from_vec(read_array(fo)?));
        }
        Ok((mw, mb))
    };
    let (m_weights, m_biases) = read_moments()?;
    let (v_weights, v_biases) = read_moments()?;

    let model = MlpModel::from_parameters(
        header.layer_sizes,
        weights,
        biases,
        header.activation,
    )?;
    let state = AdamState {
        m_weights,
        v_weights,
        m_biases,
        v_biases,
        step: header.step,
        hyper: AdamHyper { beta1: header.beta1, beta2: header.beta2, epsilon: header.epsilon },
    };
    Ok((model, state, header.train_config))
}

pub fn save_checkpoint(
    model: &MlpModel,
    state: &AdamState,
    train_config: Option<&serde_json::Value>,
    path: &Path,
) -> Result<(), NetError> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(model, state, train_config, BufWriter::new(file))
}

pub fn load_checkpoint(
    path: &Path,
    expect_sizes: Option<&[usize]>,
) -> Result<(MlpModel, AdamState, Option<serde_json::Value>), NetError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(BufReader::new(file), expect_sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn zeroed(sizes: &[usize]) -> MlpModel {
        let weights = sizes
            .windows(2)
            .map(|w| Array2::zeros((w[0], w[1])))
            .collect();
        let biases = sizes.windows(2).map(|w| Array1::zeros(w[1])).collect();
        MlpModel::from_parameters(sizes.to_vec(), weights, biases, Activation::Relu).unwrap()
    }

    #[test]
    fn zero_weights_output_equals_output_bias() {
        let mut model = zeroed(&[3, 4, 2]);
        model.biases[1] = array![0.7, -0.3];
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i + j) as f64);
        let y = model.predict(&x).unwrap();
        for row in y.rows() {
            assert_eq!(row[0], 0.7);
            assert_eq!(row[1], -0.3);
        }
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut model = zeroed(&[2, 2]);
        model.weights[0] = Array2::eye(2);
        let x = array![[1.5, -2.5], [0.0, 3.0]];
        let y = model.predict(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn three_layer_forward_matches_hand_arithmetic() {
        let mut model = zeroed(&[2, 2, 2]);
        model.weights[0] = array![[1.0, -1.0], [2.0, 0.5]];
        model.biases[0] = array![0.1, -0.2];
        model.weights[1] = array![[0.5, 1.0], [-1.0, 2.0]];
        model.biases[1] = array![0.0, 1.0];
        let x = array![[1.0, 2.0]];
        // z1 = [1*1+2*2+0.1, 1*(-1)+2*0.5-0.2] = [5.1, -0.2]; a1 = [5.1, 0]
        // y = [5.1*0.5 + 0*(-1), 5.1*1 + 0*2 + 1] = [2.55, 6.1]
        let y = model.predict(&x).unwrap();
        assert!((y[[0, 0]] - 2.55).abs() < 1e-15);
        assert!((y[[0, 1]] - 6.1).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let model = zeroed(&[3, 2]);
        let x = Array2::zeros((1, 4));
        assert!(matches!(
            model.predict(&x),
            Err(NetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let model = MlpModel::init(&[4, 8, 2], Activation::Relu, 1).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let (_, cache) = model.forward(&x).unwrap();
        let grads = backward(&model, &cache, &Array2::zeros((3, 2))).unwrap();
        assert!(grads.d_weights.iter().all(|g| g.iter().all(|&v| v == 0.0)));
        assert!(grads.d_biases.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input_broadcast() {
        // Single linear layer, loss = sum of outputs: dW[i][j] = sum_b x[b][i].
        let model = zeroed(&[3, 2]);
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let (_, cache) = model.forward(&x).unwrap();
        let grads = backward(&model, &cache, &Array2::ones((2, 2))).unwrap();
        let expected = array![[5.0, 5.0], [7.0, 7.0], [9.0, 9.0]];
        assert_eq!(grads.d_weights[0], expected);
        assert_eq!(grads.d_biases[0], array![2.0, 2.0]);
    }

    /// Central finite differences of a scalar loss over all parameters.
    fn finite_difference_check(sizes: &[usize], seed: u64) -> f64 {
        let mut model = MlpModel::init(sizes, Activation::Relu, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let batch = 3;
        let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
        // Fixed random linear loss: L = sum_ij w_ij * y_ij.
        let wout =
            Array2::from_shape_fn((batch, 2), |_| rng.random_range(-1.0..1.0f64));

        let loss_of = |m: &MlpModel| -> f64 {
            let y = m.predict(&x).unwrap();
            (&y * &wout).sum()
        };
        let (_, cache) = model.forward(&x).unwrap();
        let grads = backward(&model, &cache, &wout).unwrap();

        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].len() {
                let analytic = grads.d_weights[l].as_slice().unwrap()[idx];
                let orig = model.weights[l].as_slice().unwrap()[idx];
                model.weights[l].as_slice_mut().unwrap()[idx] = orig + h;
                let up = loss_of(&model);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig - h;
                let down = loss_of(&model);
                model.weights[l].as_slice_mut().unwrap()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
        }
        max_rel
    }

    #[test]
    fn gradients_match_finite_differences() {
        let err = finite_difference_check(&[4, 8, 2], 42);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let model0 = MlpModel::init(&[3, 4, 2], Activation::Relu, 9).unwrap();
        let mut model = model0.clone();
        let mut state = AdamState::new(&model, AdamHyper::default());
        let grads = Gradients {
            d_weights: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            d_biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        };
        adam_step(&mut model, &mut state, &grads, 0.001).unwrap();
        assert_eq!(model, model0);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_near_lr() {
        // Scalar parameter, gradient g: first update = lr * g / (|g| + eps).
        let mut model = zeroed(&[2, 2]);
        let mut state = AdamState::new(&model, AdamHyper::default());
        let mut d_weights: Vec<Array2<f64>> = vec![Array2::zeros((2, 2))];
        d_weights[0][[0, 0]] = 0.37;
        let grads = Gradients { d_weights, d_biases: vec![Array1::zeros(2)] };
        adam_step(&mut model, &mut state, &grads, 0.001).unwrap();
        let expected = -0.001 * 0.37 / (0.37 + 1e-8);
        assert!((model.weights[0][[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_two_steps_match_hand_computed_recurrence() {
        let hp = AdamHyper::default();
        let lr = 0.01;
        let gs = [0.5, -0.2];
        // Hand evaluation on a scalar parameter starting at 0.
        let mut theta = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, g) in gs.iter().enumerate() {
            let t = (t + 1) as i32;
            m = hp.beta1 * m + (1.0 - hp.beta1) * g;
            v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
            let mh = m / (1.0 - hp.beta1.powi(t));
            let vh = v / (1.0 - hp.beta2.powi(t));
            theta -= lr * mh / (vh.sqrt() + hp.epsilon);
        }

        let mut model = zeroed(&[2, 2]);
        let mut state = AdamState::new(&model, hp);
        for g in gs {
            let mut d_weights: Vec<Array2<f64>> = vec![Array2::zeros((2, 2))];
            d_weights[0][[1, 1]] = g;
            let grads = Gradients { d_weights, d_biases: vec![Array1::zeros(2)] };
            adam_step(&mut model, &mut state, &grads, lr).unwrap();
        }
        assert!((model.weights[0][[1, 1]] - theta).abs() < 1e-12);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let model = MlpModel::init(&[32, 64, 64, 2], Activation::Relu, 11).unwrap();
        let x = Array2::from_shape_fn((200, 32), |(i, j)| ((i * 31 + j * 7) % 13) as f64 * 0.05);
        let a = model.predict(&x).unwrap();
        for _ in 0..5 {
            assert_eq!(model.predict(&x).unwrap(), a);
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = MlpModel::init(&[8, 16, 2], Activation::Relu, 123).unwrap();
        let b = MlpModel::init(&[8, 16, 2], Activation::Relu, 123).unwrap();
        assert_eq!(a, b);
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        let c = MlpModel::init(&[8, 16, 2], Activation::Relu, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_variance_tracks_fan_in() {
        let model = MlpModel::init(&[512, 64, 2], Activation::Relu, 5).unwrap();
        let w = &model.weights[0];
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let target = 2.0 / 512.0;
        assert!(
            (var - target).abs() / target < 0.1,
            "variance {var} vs target {target}"
        );
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let mut model = MlpModel::init(&[4, 8, 2], Activation::Relu, 3).unwrap();
        let mut state = AdamState::new(&model, AdamHyper::default());
        // Push some non-trivial optimizer state.
        let x = Array2::from_shape_fn((4, 4), |(i, j)| (i * j) as f64 * 0.1 - 0.3);
        let (_, cache) = model.forward(&x).unwrap();
        let grads = backward(&model, &cache, &Array2::ones((4, 2))).unwrap();
        adam_step(&mut model, &mut state, &grads, 0.01).unwrap();

        let echo = serde_json::json!({"epochs": 10});
        let mut buf = Vec::new();
        write_checkpoint(&model, &state, Some(&echo), &mut buf).unwrap();
        let (m2, s2, cfg) = read_checkpoint(buf.as_slice(), None).unwrap();
        assert_eq!(model, m2);
        assert_eq!(state, s2);
        assert_eq!(cfg, Some(echo));
    }

    #[test]
    fn checkpoint_layer_size_mismatch_is_rejected() {
        let model = MlpModel::init(&[4, 8, 2], Activation::Relu, 3).unwrap();
        let state = AdamState::new(&model, AdamHyper::default());
        let mut buf = Vec::new();
        write_checkpoint(&model, &state, None, &mut buf).unwrap();
        let err = read_checkpoint(buf.as_slice(), Some(&[4, 6, 2])).unwrap_err();
        assert!(matches!(err, NetError::SchemaMismatch(_)));
    }
}
