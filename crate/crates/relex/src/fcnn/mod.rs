//! The speed-oriented classifier: fully connected layers with batch
//! normalization, leaky-ReLU activation, inverted dropout, and a softmax
//! cross-entropy head, trained from scratch with Adam.
//!
//! Hidden layers compute affine -> batch norm -> leaky ReLU -> dropout; the
//! output layer is affine only. Training-mode batch norm uses batch statistics
//! (biased variance) and maintains running statistics for inference.

pub mod io;
pub mod train;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{feature_length, FeatureConfig, FeatureVector};

pub use io::{export_text, load_model, save_model};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome, TrainingExample};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_HIDDEN_SIZES: [usize; 2] = [200, 200];

/// Parameters of one layer. Batch-norm tensors are carried for every layer
/// for a uniform serialized form; the output layer leaves them at identity and
/// never applies them.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Weight matrix, `out x in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn_gamma: Array1<f64>,
    pub bn_beta: Array1<f64>,
    pub bn_running_mean: Array1<f64>,
    pub bn_running_var: Array1<f64>,
}

impl LayerParams {
    fn identity_bn(out_dim: usize, weights: Array2<f64>) -> LayerParams {
        LayerParams {
            weights,
            bias: Array1::zeros(out_dim),
            bn_gamma: Array1::ones(out_dim),
            bn_beta: Array1::zeros(out_dim),
            bn_running_mean: Array1::zeros(out_dim),
            bn_running_var: Array1::ones(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcnnModel {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<LayerParams>,
    pub hidden_sizes: Vec<usize>,
    pub class_labels: Vec<String>,
    pub feature_config: FeatureConfig,
    pub leaky_slope: f64,
    pub version: u32,
}

impl FcnnModel {
    /// Glorot-uniform weights, zero biases, identity batch norm. Weight draws
    /// consume the RNG in layer order, row-major.
    pub fn new_random(
        hidden_sizes: &[usize],
        class_labels: &[String],
        feature_config: FeatureConfig,
        leaky_slope: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<FcnnModel> {
        Self::build(hidden_sizes, class_labels, feature_config, leaky_slope, |rows, cols| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
        })
    }

    /// All-zero weights; predicts uniform probabilities. Useful as a baseline.
    pub fn zeroed(
        hidden_sizes: &[usize],
        class_labels: &[String],
        feature_config: FeatureConfig,
    ) -> Result<FcnnModel> {
        Self::build(hidden_sizes, class_labels, feature_config, DEFAULT_LEAKY_SLOPE, |rows, cols| {
            Array2::zeros((rows, cols))
        })
    }

    fn build(
        hidden_sizes: &[usize],
        class_labels: &[String],
        feature_config: FeatureConfig,
        leaky_slope: f64,
        mut init: impl FnMut(usize, usize) -> Array2<f64>,
    ) -> Result<FcnnModel> {
        feature_config.validate()?;
        if class_labels.len() < 2 {
            return Err(Error::NotEnoughClasses(class_labels.len()));
        }
        if hidden_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        let input_dim = feature_length(&feature_config);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden_sizes);
        dims.push(class_labels.len());

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            layers.push(LayerParams::identity_bn(out_dim, init(out_dim, in_dim)));
        }
        Ok(FcnnModel {
            layers,
            hidden_sizes: hidden_sizes.to_vec(),
            class_labels: class_labels.to_vec(),
            feature_config,
            leaky_slope,
            version: MODEL_FORMAT_VERSION,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(0)
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Shape and metadata consistency.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("model has no layers"));
        }
        if self.class_count() < 2 {
            return Err(Error::NotEnoughClasses(self.class_count()));
        }
        if self.input_dim() != feature_length(&self.feature_config) {
            return Err(Error::DimMismatch(format!(
                "first layer expects {} inputs but feature config produces {}",
                self.input_dim(),
                feature_length(&self.feature_config)
            )));
        }
        if self.layers.last().expect("non-empty").out_dim() != self.class_count() {
            return Err(Error::DimMismatch(
                "output layer width differs from class count".into(),
            ));
        }
        if self.hidden_sizes.len() != self.hidden_layer_count()
            || self
                .hidden_sizes
                .iter()
                .zip(&self.layers)
                .any(|(&s, l)| s != l.out_dim())
        {
            return Err(Error::DimMismatch("hidden_sizes do not match layers".into()));
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[1].in_dim() != w[0].out_dim() {
                return Err(Error::DimMismatch(format!(
                    "layer {} output {} does not feed layer {} input {}",
                    i,
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            let d = l.out_dim();
            if l.bias.len() != d
                || l.bn_gamma.len() != d
                || l.bn_beta.len() != d
                || l.bn_running_mean.len() != d
                || l.bn_running_var.len() != d
            {
                return Err(Error::DimMismatch(format!("layer {i} vector shapes inconsistent")));
            }
            if l.bn_running_var.iter().any(|&v| v < 0.0) {
                return Err(Error::invalid(format!("layer {i} has negative running variance")));
            }
        }
        Ok(())
    }
}

/// Intermediates cached by a training-mode forward pass, as needed by
/// [`backward`] and for running-statistics updates.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (length = layer count).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-normalization affine outputs, hidden layers only.
    pub pre_bn: Vec<Array2<f64>>,
    /// Normalized activations (before gamma/beta), hidden layers only.
    pub normalized: Vec<Array2<f64>>,
    pub batch_mean: Vec<Array1<f64>>,
    pub batch_var: Vec<Array1<f64>>,
    /// Post-activation values (before dropout), hidden layers only.
    pub activated: Vec<Array2<f64>>,
    /// Scaled dropout keep-masks, hidden layers only.
    pub masks: Vec<Array2<f64>>,
}

fn affine(x: &Array2<f64>, layer: &LayerParams) -> Array2<f64> {
    x.dot(&layer.weights.t()) + &layer.bias
}

fn leaky_relu(y: f64, slope: f64) -> f64 {
    if y >= 0.0 {
        y
    } else {
        slope * y
    }
}

/// Inference forward pass: running batch-norm statistics, no dropout.
pub fn forward_infer(model: &FcnnModel, batch: &Array2<f64>) -> Result<Array2<f64>> {
    check_batch(model, batch)?;
    let mut x = batch.clone();
    let hidden = model.hidden_layer_count();
    for layer in &model.layers[..hidden] {
        let z = affine(&x, layer);
        let mut y = z;
        for mut row in y.rows_mut() {
            for j in 0..row.len() {
                let norm = (row[j] - layer.bn_running_mean[j])
                    / (layer.bn_running_var[j] + BN_EPSILON).sqrt();
                row[j] = leaky_relu(layer.bn_gamma[j] * norm + layer.bn_beta[j], model.leaky_slope);
            }
        }
        x = y;
    }
    Ok(affine(&x, &model.layers[hidden]))
}

/// Sample scaled dropout keep-masks for each hidden layer. With probability
/// `dropout` a unit is dropped (0.0); kept units carry `1 / (1 - dropout)` so
/// inference needs no rescaling. A rate of 0 yields all-ones without
/// consuming randomness.
pub fn sample_dropout_masks(
    model: &FcnnModel,
    batch_size: usize,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Array2<f64>> {
    let keep = 1.0 - dropout;
    model.layers[..model.hidden_layer_count()]
        .iter()
        .map(|layer| {
            if dropout == 0.0 {
                Array2::ones((batch_size, layer.out_dim()))
            } else {
                Array2::from_shape_fn((batch_size, layer.out_dim()), |_| {
                    if rng.random_range(0.0..1.0) < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            }
        })
        .collect()
}

/// Training forward pass with explicit dropout masks (one per hidden layer).
/// Batch statistics are computed per call; the caller updates running
/// statistics from the returned cache.
pub fn forward_train(
    model: &FcnnModel,
    batch: &Array2<f64>,
    masks: &[Array2<f64>],
) -> Result<(Array2<f64>, ForwardCache)> {
    check_batch(model, batch)?;
    let n = batch.nrows();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let hidden = model.hidden_layer_count();
    if masks.len() != hidden {
        return Err(Error::DimMismatch(format!(
            "expected {hidden} dropout masks, got {}",
            masks.len()
        )));
    }

    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(hidden + 1),
        pre_bn: Vec::with_capacity(hidden),
        normalized: Vec::with_capacity(hidden),
        batch_mean: Vec::with_capacity(hidden),
        batch_var: Vec::with_capacity(hidden),
        activated: Vec::with_capacity(hidden),
        masks: masks.to_vec(),
    };

    let mut x = batch.clone();
    for (l, layer) in model.layers[..hidden].iter().enumerate() {
        if masks[l].dim() != (n, layer.out_dim()) {
            return Err(Error::DimMismatch(format!(
                "mask {l} has shape {:?}, expected ({n}, {})",
                masks[l].dim(),
                layer.out_dim()
            )));
        }
        cache.inputs.push(x.clone());
        let z = affine(&x, layer);

        let mean = z.mean_axis(Axis(0)).expect("n >= 2");
        // Biased (1/N) variance, the normalizing convention.
        let var = z.map_axis(Axis(0), |col| {
            let m = col.mean().expect("n >= 2");
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64
        });

        let mut normalized = z.clone();
        for mut row in normalized.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - mean[j]) / (var[j] + BN_EPSILON).sqrt();
            }
        }

        let mut activated = normalized.clone();
        for mut row in activated.rows_mut() {
            for j in 0..row.len() {
                activated_value(&mut row[j], layer, j, model.leaky_slope);
            }
        }

        let dropped = &activated * &masks[l];

        cache.pre_bn.push(z);
        cache.batch_mean.push(mean);
        cache.batch_var.push(var);
        cache.normalized.push(normalized);
        cache.activated.push(activated);
        x = dropped;
    }
    cache.inputs.push(x.clone());
    let logits = affine(&x, &model.layers[hidden]);
    Ok((logits, cache))
}

fn activated_value(v: &mut f64, layer: &LayerParams, j: usize, slope: f64) {
    *v = leaky_relu(layer.bn_gamma[j] * *v + layer.bn_beta[j], slope);
}

fn check_batch(model: &FcnnModel, batch: &Array2<f64>) -> Result<()> {
    if batch.ncols() != model.input_dim() {
        return Err(Error::DimMismatch(format!(
            "batch has {} features, model expects {}",
            batch.ncols(),
            model.input_dim()
        )));
    }
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// Mean softmax cross-entropy over the batch, with max-subtraction for
/// numerical stability. Returns the loss and its gradient with respect to the
/// logits: `(softmax - onehot) / batch_size`.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    assert_eq!(labels.len(), n, "one label per row");
    let mut dlogits = logits.clone();
    let mut loss = 0.0;
    for (i, mut row) in dlogits.rows_mut().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss -= (row[labels[i]] / sum).ln();
        for (j, v) in row.iter_mut().enumerate() {
            let p = *v / sum;
            *v = (p - if j == labels[i] { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (loss / n as f64, dlogits)
}

/// Softmax probabilities of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Per-layer parameter gradients, matching the [`LayerParams`] tensors that
/// training updates.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn_gamma: Array1<f64>,
    pub bn_beta: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

/// Exact analytic gradients for all parameters given a training-mode cache
/// and the loss gradient with respect to the logits. Includes the full
/// batch-norm backward pass through the batch statistics.
pub fn backward(model: &FcnnModel, cache: &ForwardCache, dlogits: &Array2<f64>) -> Result<Gradients> {
    let hidden = model.hidden_layer_count();
    if cache.inputs.len() != hidden + 1 || cache.pre_bn.len() != hidden {
        return Err(Error::invalid("forward cache does not match model"));
    }
    let n = dlogits.nrows() as f64;
    let _ = n;

    let mut layer_grads: Vec<Option<LayerGrads>> = (0..model.layers.len()).map(|_| None).collect();

    // Output layer: plain affine backward.
    let out_layer = &model.layers[hidden];
    let out_input = &cache.inputs[hidden];
    layer_grads[hidden] = Some(LayerGrads {
        weights: dlogits.t().dot(out_input),
        bias: dlogits.sum_axis(Axis(0)),
        bn_gamma: Array1::zeros(out_layer.out_dim()),
        bn_beta: Array1::zeros(out_layer.out_dim()),
    });
    let mut dx = dlogits.dot(&out_layer.weights);

    for l in (0..hidden).rev() {
        let layer = &model.layers[l];
        let rows = dx.nrows();
        let cols = layer.out_dim();

        // Through dropout: d(a * mask)/da = mask.
        let da = &dx * &cache.masks[l];

        // Through leaky ReLU: derivative 1 for y >= 0 else slope; the sign of
        // the activation output equals the sign of its input.
        let mut dy = da;
        for (mut drow, arow) in dy.rows_mut().into_iter().zip(cache.activated[l].rows()) {
            for j in 0..cols {
                if arow[j] < 0.0 {
                    drow[j] *= model.leaky_slope;
                }
            }
        }

        // Batch-norm backward.
        let zhat = &cache.normalized[l];
        let z = &cache.pre_bn[l];
        let mean = &cache.batch_mean[l];
        let var = &cache.batch_var[l];

        let dgamma = (&dy * zhat).sum_axis(Axis(0));
        let dbeta = dy.sum_axis(Axis(0));

        let mut dz = Array2::zeros((rows, cols));
        let nf = rows as f64;
        for j in 0..cols {
            let inv_std = 1.0 / (var[j] + BN_EPSILON).sqrt();
            let gamma = layer.bn_gamma[j];

            let mut dvar = 0.0;
            let mut dmean_direct = 0.0;
            let mut sum_center = 0.0;
            for i in 0..rows {
                let dxhat = dy[(i, j)] * gamma;
                let center = z[(i, j)] - mean[j];
                dvar += dxhat * center;
                dmean_direct -= dxhat * inv_std;
                sum_center += center;
            }
            dvar *= -0.5 * inv_std * inv_std * inv_std;
            let dmean = dmean_direct + dvar * (-2.0 * sum_center / nf);
            for i in 0..rows {
                let dxhat = dy[(i, j)] * gamma;
                dz[(i, j)] =
                    dxhat * inv_std + dvar * 2.0 * (z[(i, j)] - mean[j]) / nf + dmean / nf;
            }
        }

        let input = &cache.inputs[l];
        layer_grads[l] = Some(LayerGrads {
            weights: dz.t().dot(input),
            bias: dz.sum_axis(Axis(0)),
            bn_gamma: dgamma,
            bn_beta: dbeta,
        });
        if l > 0 {
            dx = dz.dot(&layer.weights);
        }
    }

    Ok(Gradients {
        layers: layer_grads.into_iter().map(|g| g.expect("all layers set")).collect(),
    })
}

/// Update running batch-norm statistics from a training-mode forward cache:
/// `running = momentum * running + (1 - momentum) * batch_stat`.
pub fn update_running_stats(model: &mut FcnnModel, cache: &ForwardCache) {
    for (l, layer) in model.layers[..cache.pre_bn.len()].iter_mut().enumerate() {
        for j in 0..layer.out_dim() {
            layer.bn_running_mean[j] =
                BN_MOMENTUM * layer.bn_running_mean[j] + (1.0 - BN_MOMENTUM) * cache.batch_mean[l][j];
            layer.bn_running_var[j] =
                BN_MOMENTUM * layer.bn_running_var[j] + (1.0 - BN_MOMENTUM) * cache.batch_var[l][j];
        }
    }
}

/// Adam first/second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
}

impl AdamState {
    pub fn new(model: &FcnnModel) -> AdamState {
        let zeros = |model: &FcnnModel| {
            model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Array2::zeros((l.out_dim(), l.in_dim())),
                    bias: Array1::zeros(l.out_dim()),
                    bn_gamma: Array1::zeros(l.out_dim()),
                    bn_beta: Array1::zeros(l.out_dim()),
                })
                .collect()
        };
        AdamState {
            step: 0,
            m: zeros(model),
            v: zeros(model),
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
) {
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

/// One Adam step over every parameter tensor. `state.step` is incremented
/// first, so bias correction sees t = 1 on the first call.
pub fn adam_step(
    model: &mut FcnnModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr_t: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    state.step += 1;
    let t = state.step;
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.m[l];
        let v = &mut state.v[l];
        adam_update(
            layer.weights.as_slice_mut().expect("standard layout"),
            g.weights.as_slice().expect("standard layout"),
            m.weights.as_slice_mut().expect("standard layout"),
            v.weights.as_slice_mut().expect("standard layout"),
            lr_t, beta1, beta2, eps, t,
        );
        adam_update(
            layer.bias.as_slice_mut().expect("contiguous"),
            g.bias.as_slice().expect("contiguous"),
            m.bias.as_slice_mut().expect("contiguous"),
            v.bias.as_slice_mut().expect("contiguous"),
            lr_t, beta1, beta2, eps, t,
        );
        adam_update(
            layer.bn_gamma.as_slice_mut().expect("contiguous"),
            g.bn_gamma.as_slice().expect("contiguous"),
            m.bn_gamma.as_slice_mut().expect("contiguous"),
            v.bn_gamma.as_slice_mut().expect("contiguous"),
            lr_t, beta1, beta2, eps, t,
        );
        adam_update(
            layer.bn_beta.as_slice_mut().expect("contiguous"),
            g.bn_beta.as_slice().expect("contiguous"),
            m.bn_beta.as_slice_mut().expect("contiguous"),
            v.bn_beta.as_slice_mut().expect("contiguous"),
            lr_t, beta1, beta2, eps, t,
        );
    }
}

/// Learning rate at a given epoch: `base / (1 + decay * epoch)`.
pub fn decayed_learning_rate(base: f64, decay: f64, epoch: usize) -> f64 {
    base / (1.0 + decay * epoch as f64)
}

/// Classify one feature vector: argmax class (ties break toward the lowest
/// class index) plus the full probability vector.
pub fn predict(model: &FcnnModel, features: &FeatureVector) -> Result<(String, Vec<f64>)> {
    let mut results = predict_batch(model, std::slice::from_ref(features))?;
    Ok(results.pop().expect("one result per input"))
}

/// Batch classification; one (label, probabilities) pair per input row.
pub fn predict_batch(
    model: &FcnnModel,
    features: &[FeatureVector],
) -> Result<Vec<(String, Vec<f64>)>> {
    if features.is_empty() {
        return Ok(Vec::new());
    }
    let dim = model.input_dim();
    for f in features {
        if f.len() != dim {
            return Err(Error::DimMismatch(format!(
                "feature vector length {} does not match model input {dim}",
                f.len()
            )));
        }
    }
    let mut batch = Array2::zeros((features.len(), dim));
    for (i, f) in features.iter().enumerate() {
        batch.row_mut(i).assign(&Array1::from_vec(f.0.clone()));
    }
    let logits = forward_infer(model, &batch)?;
    let mut out = Vec::with_capacity(features.len());
    for row in logits.rows() {
        let probs = softmax(row.as_slice().expect("contiguous row"));
        let mut best = 0usize;
        for (j, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = j;
            }
        }
        out.push((model.class_labels[best].clone(), probs));
    }
    Ok(out)
}
