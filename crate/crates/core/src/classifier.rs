//! Classification head over backend embeddings.
//!
//! The head is a single linear layer to two logits (human-directed,
//! device-directed) trained with softmax cross-entropy. Optionally the
//! embedding first passes through a frozen linear backbone carrying a
//! low-rank adapter `base + (alpha / r) * up * down`; only the adapter and the
//! head are trained.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("loss became non-finite at epoch {epoch}, step {step} (learning rate {learning_rate})")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        learning_rate: f64,
    },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ClassifierError> {
        if data.len() != rows * cols {
            return Err(ClassifierError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn random_normal(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            })
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.cols {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, ClassifierError> {
        if self.cols != other.rows {
            return Err(ClassifierError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let row = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Linear layer from an embedding to two logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// One `[class 0, class 1]` pair per input dimension.
    pub weights: Vec<[f64; 2]>,
    pub bias: [f64; 2],
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        LinearHead {
            weights: vec![[0.0; 2]; dim],
            bias: [0.0; 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `2 * dim + 2`.
    pub fn param_count(&self) -> usize {
        2 * self.dim() + 2
    }

    pub fn is_finite(&self) -> bool {
        self.bias.iter().all(|b| b.is_finite())
            && self.weights.iter().flatten().all(|w| w.is_finite())
    }
}

/// `weights^T x + bias`.
pub fn forward(head: &LinearHead, x: &[f64]) -> Result<[f64; 2], ClassifierError> {
    if x.len() != head.dim() {
        return Err(ClassifierError::DimensionMismatch {
            expected: head.dim(),
            actual: x.len(),
        });
    }
    let mut acc = [0.0; 2];
    for (w, &xi) in head.weights.iter().zip(x) {
        acc[0] += w[0] * xi;
        acc[1] += w[1] * xi;
    }
    Ok([acc[0] + head.bias[0], acc[1] + head.bias[1]])
}

/// Softmax over a logit pair.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = libm::exp(logits[0] - m);
    let e1 = libm::exp(logits[1] - m);
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Probability that the follow-up is device-directed.
pub fn predict_score(head: &LinearHead, x: &[f64]) -> Result<f64, ClassifierError> {
    Ok(softmax(forward(head, x)?)[1])
}

/// `1` when `score >= threshold`.
pub fn binarize(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// `-log softmax(logits)[label]`, evaluated as a softplus of the logit margin.
pub fn cross_entropy_loss(logits: [f64; 2], label: u8) -> f64 {
    let (own, other) = if label == 1 {
        (logits[1], logits[0])
    } else {
        (logits[0], logits[1])
    };
    softplus(other - own)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: Vec<[f64; 2]>,
    pub bias: [f64; 2],
}

/// `(softmax - onehot)` as the logit gradient for `label`.
pub fn logit_gradient(logits: [f64; 2], label: u8) -> [f64; 2] {
    let p = softmax(logits);
    let y = if label == 1 { [0.0, 1.0] } else { [1.0, 0.0] };
    [p[0] - y[0], p[1] - y[1]]
}

/// Gradient of the cross-entropy loss with respect to the head parameters.
pub fn gradient(head: &LinearHead, x: &[f64], label: u8) -> Result<HeadGradient, ClassifierError> {
    let g = logit_gradient(forward(head, x)?, label);
    Ok(HeadGradient {
        weights: x.iter().map(|&xi| [g[0] * xi, g[1] * xi]).collect(),
        bias: g,
    })
}

/// Low-rank update `(alpha / rank) * up * down` for a `d_out x d_in` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub rank: usize,
    pub alpha: f64,
    /// `rank x d_in`
    pub down: Matrix,
    /// `d_out x rank`
    pub up: Matrix,
}

impl LoraAdapter {
    pub fn new(alpha: f64, down: Matrix, up: Matrix) -> Result<Self, ClassifierError> {
        let rank = down.rows();
        if rank == 0 || up.cols() != rank {
            return Err(ClassifierError::Shape(format!(
                "down is {}x{}, up is {}x{}: ranks disagree or are zero",
                down.rows(),
                down.cols(),
                up.rows(),
                up.cols()
            )));
        }
        Ok(LoraAdapter {
            rank,
            alpha,
            down,
            up,
        })
    }

    /// Standard initialisation: `down` random normal scaled by
    /// `1/sqrt(d_in)`, `up` zero, so the update starts at exactly zero.
    pub fn init(rank: usize, alpha: f64, d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = 1.0 / libm::sqrt(d_in as f64);
        LoraAdapter {
            rank,
            alpha,
            down: Matrix::random_normal(rank, d_in, scale, rng),
            up: Matrix::zeros(d_out, rank),
        }
    }

    pub fn d_in(&self) -> usize {
        self.down.cols()
    }

    pub fn d_out(&self) -> usize {
        self.up.rows()
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    /// `rank * (d_in + d_out)`.
    pub fn param_count(&self) -> usize {
        lora_param_count(self.rank, self.d_in(), self.d_out())
    }

    pub fn delta(&self) -> Matrix {
        let mut d = self.up.matmul(&self.down).expect("adapter shapes are checked");
        let s = self.scale();
        d.data.iter_mut().for_each(|v| *v *= s);
        d
    }
}

pub fn lora_param_count(rank: usize, d_in: usize, d_out: usize) -> usize {
    rank * (d_in + d_out)
}

/// `base + (alpha / rank) * up * down`. `base` is left untouched.
pub fn apply_lora(base: &Matrix, adapter: &LoraAdapter) -> Result<Matrix, ClassifierError> {
    if base.rows() != adapter.d_out() || base.cols() != adapter.d_in() {
        return Err(ClassifierError::Shape(format!(
            "base is {}x{}, adapter is {}x{}",
            base.rows(),
            base.cols(),
            adapter.d_out(),
            adapter.d_in()
        )));
    }
    let delta = adapter.delta();
    let data = base
        .data
        .iter()
        .zip(&delta.data)
        .map(|(&b, &d)| if d == 0.0 { b } else { b + d })
        .collect();
    Ok(Matrix {
        rows: base.rows,
        cols: base.cols,
        data,
    })
}

/// Frozen projection with a trainable adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraBackbone {
    pub base: Matrix,
    pub adapter: LoraAdapter,
}

struct BackboneActivation {
    hidden: Vec<f64>,
    down_x: Vec<f64>,
}

impl LoraBackbone {
    pub fn new(base: Matrix, adapter: LoraAdapter) -> Result<Self, ClassifierError> {
        if base.rows() != adapter.d_out() || base.cols() != adapter.d_in() {
            return Err(ClassifierError::Shape(format!(
                "base is {}x{}, adapter is {}x{}",
                base.rows(),
                base.cols(),
                adapter.d_out(),
                adapter.d_in()
            )));
        }
        Ok(LoraBackbone { base, adapter })
    }

    pub fn input_dim(&self) -> usize {
        self.base.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.base.rows()
    }

    /// `base x + scale * up (down x)`, without materialising the update.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        Ok(self.activate(x)?.hidden)
    }

    fn activate(&self, x: &[f64]) -> Result<BackboneActivation, ClassifierError> {
        let mut hidden = self.base.matvec(x)?;
        let down_x = self.adapter.down.matvec(x)?;
        let update = self.adapter.up.matvec(&down_x)?;
        let s = self.adapter.scale();
        for (h, u) in hidden.iter_mut().zip(update) {
            if u != 0.0 {
                *h += s * u;
            }
        }
        Ok(BackboneActivation { hidden, down_x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Scale each embedding to unit L2 norm before the head.
    pub l2_normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            epochs: 3,
            warmup_fraction: 0.03,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Sgd,
            l2_normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::Config(m.into()));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if let Optimizer::Momentum { beta } = self.optimizer {
            if !(0.0..1.0).contains(&beta) {
                return bad("momentum beta must lie in [0, 1)");
            }
        }
        Ok(())
    }

    /// Linearly ramped learning rate for 0-based `step` of `total_steps`.
    pub fn learning_rate_at(&self, step: usize, total_steps: usize) -> f64 {
        let warmup = libm::ceil(self.warmup_fraction * total_steps as f64) as usize;
        if step < warmup {
            self.learning_rate * (step + 1) as f64 / warmup as f64
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraSpec {
    pub rank: usize,
    pub alpha: f64,
    pub hidden_dim: usize,
}

/// A trained head, with its adapted backbone when one was used.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub head: LinearHead,
    pub backbone: Option<LoraBackbone>,
    pub l2_normalize: bool,
    /// Mean training loss of each epoch, measured before each update.
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        match &self.backbone {
            Some(b) => b.input_dim(),
            None => self.head.dim(),
        }
    }

    /// Parameters updated by training (head plus adapter).
    pub fn trainable_param_count(&self) -> usize {
        self.head.param_count() + self.backbone.as_ref().map_or(0, |b| b.adapter.param_count())
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2], ClassifierError> {
        let x = self.prepare(x)?;
        match &self.backbone {
            Some(b) => forward(&self.head, &b.forward(&x)?),
            None => forward(&self.head, &x),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        Ok(softmax(self.logits(x)?)[1])
    }

    pub fn loss(&self, x: &[f64], label: u8) -> Result<f64, ClassifierError> {
        Ok(cross_entropy_loss(self.logits(x)?, label))
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.input_dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(if self.l2_normalize {
            l2_normalized(x)
        } else {
            x.to_vec()
        })
    }

    /// Gradient of the loss for one example, laid out like
    /// [`TrainedModel::parameters`].
    pub fn loss_gradient(&self, x: &[f64], label: u8) -> Result<Vec<f64>, ClassifierError> {
        let x = self.prepare(x)?;
        let mut out = vec![0.0; self.parameters().len()];
        accumulate_gradient(self, &x, label, &mut out)?;
        Ok(out)
    }

    /// Flat view of the trainable parameters: head weights (row-major,
    /// two per input dim), head bias, then adapter `down` and `up`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.head.weights.iter().flatten().copied().collect();
        p.extend_from_slice(&self.head.bias);
        if let Some(b) = &self.backbone {
            p.extend_from_slice(b.adapter.down.as_slice());
            p.extend_from_slice(b.adapter.up.as_slice());
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let dim = self.head.dim();
        for (w, pair) in self.head.weights.iter_mut().zip(p.chunks_exact(2)) {
            *w = [pair[0], pair[1]];
        }
        self.head.bias = [p[2 * dim], p[2 * dim + 1]];
        if let Some(b) = &mut self.backbone {
            let mut at = 2 * dim + 2;
            let n = b.adapter.down.data.len();
            b.adapter.down.data.copy_from_slice(&p[at..at + n]);
            at += n;
            let n = b.adapter.up.data.len();
            b.adapter.up.data.copy_from_slice(&p[at..at + n]);
        }
    }
}

fn l2_normalized(x: &[f64]) -> Vec<f64> {
    let norm = libm::sqrt(dot(x, x));
    if norm == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / norm).collect()
    }
}

// Adds the gradient for one (already prepared) example into `out`.
fn accumulate_gradient(
    model: &TrainedModel,
    x: &[f64],
    label: u8,
    out: &mut [f64],
) -> Result<f64, ClassifierError> {
    let activation = match &model.backbone {
        Some(b) => Some(b.activate(x)?),
        None => None,
    };
    let features: &[f64] = activation.as_ref().map_or(x, |a| &a.hidden);
    let logits = forward(&model.head, features)?;
    let loss = cross_entropy_loss(logits, label);
    let g = logit_gradient(logits, label);

    let dim = model.head.dim();
    for (j, &f) in features.iter().enumerate() {
        out[2 * j] += g[0] * f;
        out[2 * j + 1] += g[1] * f;
    }
    out[2 * dim] += g[0];
    out[2 * dim + 1] += g[1];

    if let (Some(b), Some(act)) = (&model.backbone, &activation) {
        let adapter = &b.adapter;
        let s = adapter.scale();
        let rank = adapter.rank;
        let d_in = adapter.d_in();
        // gradient with respect to the hidden layer
        let dh: Vec<f64> = model
            .head
            .weights
            .iter()
            .map(|w| g[0] * w[0] + g[1] * w[1])
            .collect();
        let down_at = 2 * dim + 2;
        let up_at = down_at + rank * d_in;
        for k in 0..rank {
            let back: f64 = (0..adapter.d_out())
                .map(|i| adapter.up.get(i, k) * dh[i])
                .fold(0.0, |a, v| a + v);
            let row = &mut out[down_at + k * d_in..down_at + (k + 1) * d_in];
            for (o, &xj) in row.iter_mut().zip(x) {
                *o += s * back * xj;
            }
        }
        for (i, &dhi) in dh.iter().enumerate() {
            for k in 0..rank {
                out[up_at + i * rank + k] += s * dhi * act.down_x[k];
            }
        }
    }
    Ok(loss)
}

/// Trains a head (and optionally a low-rank adapter on a frozen random
/// projection) with mini-batch SGD.
///
/// Deterministic for a given seed: the shuffle order, the backbone draw and
/// the gradient summation order are all fixed.
pub fn train(
    dataset: &[(Vec<f64>, u8)],
    config: &TrainConfig,
    lora: Option<&LoraSpec>,
) -> Result<TrainedModel, ClassifierError> {
    config.validate()?;
    let Some((first, _)) = dataset.first() else {
        return Err(ClassifierError::EmptyDataset);
    };
    let dim = first.len();
    for (x, y) in dataset {
        if x.len() != dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if *y > 1 {
            return Err(ClassifierError::BadLabel(*y));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = match lora {
        None => TrainedModel {
            head: LinearHead::zeros(dim),
            backbone: None,
            l2_normalize: config.l2_normalize,
            loss_trace: Vec::new(),
        },
        Some(spec) => {
            if spec.rank == 0 || spec.hidden_dim == 0 {
                return Err(ClassifierError::Config("adapter rank and hidden_dim must be positive".into()));
            }
            let base = Matrix::random_normal(spec.hidden_dim, dim, 1.0 / libm::sqrt(dim as f64), &mut rng);
            let adapter = LoraAdapter::init(spec.rank, spec.alpha, dim, spec.hidden_dim, &mut rng);
            TrainedModel {
                head: LinearHead::zeros(spec.hidden_dim),
                backbone: Some(LoraBackbone::new(base, adapter)?),
                l2_normalize: config.l2_normalize,
                loss_trace: Vec::new(),
            }
        }
    };

    let inputs: Vec<Vec<f64>> = dataset
        .iter()
        .map(|(x, _)| if config.l2_normalize { l2_normalized(x) } else { x.clone() })
        .collect();
    let steps_per_epoch = dataset.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut params = model.parameters();
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += accumulate_gradient(&model, &inputs[i], dataset[i].1, &mut grad)?;
            }
            let lr = config.learning_rate_at(step, total_steps);
            if !batch_loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss {
                    epoch,
                    step,
                    learning_rate: lr,
                });
            }
            epoch_loss += batch_loss;
            let n = batch.len() as f64;
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * g / n;
                    }
                }
                Optimizer::Momentum { beta } => {
                    for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                        *v = beta * *v + g / n;
                        *p -= lr * *v;
                    }
                }
            }
            model.set_parameters(&params);
            step += 1;
        }
        model.loss_trace.push(epoch_loss / dataset.len() as f64);
    }
    if !model.head.is_finite() {
        return Err(ClassifierError::NonFiniteLoss {
            epoch: config.epochs,
            step,
            learning_rate: config.learning_rate,
        });
    }
    Ok(model)
}
