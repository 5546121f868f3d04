//! Minimal dense feed-forward network kernel: seeded initialization, forward
//! pass, analytic gradients, and mini-batch SGD with momentum and cosine
//! learning-rate decay.
//!
//! Hidden layers use the rectifier; the output layer emits raw scores whose
//! row-wise argmax is the predicted label. Training minimizes softmax
//! cross-entropy (the margin error used for evaluation elsewhere is not
//! differentiable). Everything is deterministic for fixed seeds.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Hidden-layer activation. Only the rectifier is supported; the tag exists
/// so network metadata is explicit in configs and debug output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Rectifier,
}

/// A dense multi-layer perceptron.
///
/// `layer_dims` runs input dim, hidden dims…, output dim (= class count);
/// `weights[i]` has shape `(layer_dims[i], layer_dims[i+1])` and `biases[i]`
/// length `layer_dims[i+1]`. Depth counts hidden layers only.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layer_dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
    seed: u64,
}

/// Training hyper-parameters for [`train`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub cosine_decay: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.025,
            momentum: 0.9,
            steps: 5000,
            batch_size: 128,
            cosine_decay: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 3 {
        return Err(Error::Config(format!(
            "need at least input, one hidden, and output layer dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config(format!(
            "all layer dims must be positive, got {layer_dims:?}"
        )));
    }
    Ok(())
}

/// Initializes a network with weights drawn uniformly from
/// ±1/sqrt(fan_in) and zero biases, deterministically from `seed`.
pub fn init_net(layer_dims: &[usize], seed: u64) -> Result<DenseNet> {
    check_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for window in layer_dims.windows(2) {
        let (fan_in, fan_out) = (window[0], window[1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut w = Array2::<f64>::zeros((fan_in, fan_out));
        for slot in w.iter_mut() {
            *slot = rng.gen_range(-scale..scale);
        }
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(DenseNet {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        activation: Activation::Rectifier,
        seed,
    })
}

impl DenseNet {
    /// Builds a network from explicit parameters (used for hand-crafted
    /// fixtures and golden tests).
    pub fn from_params(
        layer_dims: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        if weights.len() != layer_dims.len() - 1 || biases.len() != layer_dims.len() - 1 {
            return Err(Error::Config(format!(
                "expected {} weight/bias layers, got {}/{}",
                layer_dims.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for (i, window) in layer_dims.windows(2).enumerate() {
            if weights[i].dim() != (window[0], window[1]) || biases[i].len() != window[1] {
                return Err(Error::Config(format!(
                    "layer {i} parameter shapes do not match dims {window:?}"
                )));
            }
        }
        if weights.iter().flat_map(|w| w.iter()).any(|v| !v.is_finite())
            || biases.iter().flat_map(|b| b.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::Config("parameters must be finite".into()));
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            activation: Activation::Rectifier,
            seed: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    fn check_batch(&self, batch: &Array2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: format!("batch with {} columns", self.input_dim()),
                got: format!("{} columns", batch.ncols()),
            });
        }
        Ok(())
    }

    /// Raw class scores for a batch, one row per instance.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_with_hidden(batch)?.0)
    }

    /// Raw class scores plus the activations of the last hidden layer
    /// (used when new candidates stack on existing members' features).
    pub fn forward_with_hidden(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_batch(batch)?;
        let n_layers = self.weights.len();
        let mut a = batch.dot(&self.weights[0]) + &self.biases[0];
        a.mapv_inplace(|v| v.max(0.0));
        for i in 1..n_layers - 1 {
            a = a.dot(&self.weights[i]) + &self.biases[i];
            a.mapv_inplace(|v| v.max(0.0));
        }
        let last_hidden = a.clone();
        let scores = a.dot(&self.weights[n_layers - 1]) + &self.biases[n_layers - 1];
        Ok((scores, last_hidden))
    }

    /// Argmax labels for a batch, ties broken toward the smaller class.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Vec<u32>> {
        Ok(argmax_labels(&self.forward(batch)?))
    }
}

/// Row-wise argmax with ties broken toward the smaller class index.
pub fn argmax_labels(scores: &Array2<f64>) -> Vec<u32> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0usize;
            let mut best_v = row[0];
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > best_v {
                    best = c;
                    best_v = v;
                }
            }
            best as u32
        })
        .collect()
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut probs = scores.clone();
    for mut row in probs.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    probs
}

/// Per-layer parameter gradients, shaped like the network's parameters.
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Mean softmax cross-entropy over the batch and its analytic gradients.
pub fn loss_and_grads(net: &DenseNet, x: &Array2<f64>, y: &[u32]) -> Result<(f64, Grads)> {
    net.check_batch(x)?;
    if y.len() != x.nrows() {
        return Err(Error::Shape {
            expected: format!("{} labels", x.nrows()),
            got: format!("{}", y.len()),
        });
    }
    let n_layers = net.weights.len();
    let m = x.nrows() as f64;

    // Forward, keeping every activation for the backward pass.
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
    let mut a = x.clone();
    for i in 0..n_layers - 1 {
        a = a.dot(&net.weights[i]) + &net.biases[i];
        a.mapv_inplace(|v| v.max(0.0));
        activations.push(a.clone());
    }
    let scores = a.dot(&net.weights[n_layers - 1]) + &net.biases[n_layers - 1];
    let probs = softmax_rows(&scores);

    let mut loss = 0.0;
    for (i, &label) in y.iter().enumerate() {
        loss -= probs[(i, label as usize)].ln();
    }
    loss /= m;

    // Backward: delta starts as (probs − one-hot)/m at the output.
    let mut delta = probs;
    for (i, &label) in y.iter().enumerate() {
        delta[(i, label as usize)] -= 1.0;
    }
    delta.mapv_inplace(|v| v / m);

    let mut grad_w: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
    let mut grad_b: Vec<Array1<f64>> = vec![Array1::zeros(0); n_layers];
    for layer in (0..n_layers).rev() {
        let input: &Array2<f64> = if layer == 0 { x } else { &activations[layer - 1] };
        grad_w[layer] = input.t().dot(&delta);
        grad_b[layer] = delta.sum_axis(Axis(0));
        if layer > 0 {
            let mut upstream = delta.dot(&net.weights[layer].t());
            // Rectifier gate: the stored activation is max(0, z), so a
            // strictly positive activation marks an open gate.
            upstream.zip_mut_with(&activations[layer - 1], |g, &act| {
                if act <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = upstream;
        }
    }
    Ok((
        loss,
        Grads {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}

/// Cosine-decayed learning rate: `0.5·lr0·(1 + cos(π·step/steps))`.
pub fn cosine_lr(lr0: f64, step: usize, steps: usize) -> f64 {
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos())
}

/// Trains a network with mini-batch SGD plus momentum, returning the trained
/// network and the per-step mean batch loss.
///
/// Batches walk a seeded permutation of the instances in consecutive chunks
/// (the final short chunk is used as a smaller batch), reshuffling at each
/// epoch boundary. `steps == 0` returns the network unchanged.
pub fn train(net: DenseNet, data: &Dataset, cfg: &TrainConfig) -> Result<(DenseNet, Vec<f64>)> {
    cfg.validate()?;
    if data.d() != net.input_dim() {
        return Err(Error::Shape {
            expected: format!("{} input features", net.input_dim()),
            got: format!("{}", data.d()),
        });
    }
    if data.n_classes() != net.output_dim() {
        return Err(Error::Shape {
            expected: format!("{} output classes", net.output_dim()),
            got: format!("{}", data.n_classes()),
        });
    }
    let mut net = net;
    if cfg.steps == 0 {
        return Ok((net, Vec::new()));
    }

    let m = data.m();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut vel_w: Vec<Array2<f64>> = net.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut vel_b: Vec<Array1<f64>> = net.biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut curve = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        if cursor >= m {
            perm.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(m);
        let idx = &perm[cursor..end];
        cursor = end;

        let xb = data.features().select(Axis(0), idx);
        let yb: Vec<u32> = idx.iter().map(|&i| data.labels()[i]).collect();
        let (loss, grads) = loss_and_grads(&net, &xb, &yb)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        curve.push(loss);

        let lr = if cfg.cosine_decay {
            cosine_lr(cfg.learning_rate, step, cfg.steps)
        } else {
            cfg.learning_rate
        };
        for layer in 0..net.weights.len() {
            vel_w[layer].zip_mut_with(&grads.weights[layer], |v, &g| *v = cfg.momentum * *v + g);
            net.weights[layer].zip_mut_with(&vel_w[layer], |w, &v| *w -= lr * v);
            vel_b[layer].zip_mut_with(&grads.biases[layer], |v, &g| *v = cfg.momentum * *v + g);
            net.biases[layer].zip_mut_with(&vel_b[layer], |b, &v| *b -= lr * v);
        }
    }
    Ok((net, curve))
}
