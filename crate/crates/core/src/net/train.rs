use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax, Network, ParamGrad};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Weight decay used for the synthetic frequency-detection task. It removes
/// the part of the initial first-layer weights the data never constrains.
pub const SYNTHETIC_WEIGHT_DECAY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Fraction of the dataset (taken from the tail) held out for testing.
    pub test_fraction: f64,
    /// Decoupled weight decay: every step scales weights (not biases) by
    /// `1 − learning_rate · weight_decay`.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed: 0,
            test_fraction: 0.1,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!("test fraction must be in [0, 1), got {}", self.test_fraction)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0 && self.learning_rate * self.weight_decay < 1.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative with learning_rate · weight_decay < 1, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_accuracy: f64,
    /// `None` when no samples were held out.
    pub test_accuracy: Option<f64>,
}

struct Adam {
    m: Vec<Option<ParamGrad>>,
    v: Vec<Option<ParamGrad>>,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(net: &Network) -> Self {
        let zeros = || net.layers.iter().map(ParamGrad::zeros_like).collect::<Vec<_>>();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Network, grads: &[Option<ParamGrad>], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (self.m[i].as_mut().unwrap(), self.v[i].as_mut().unwrap());
            let (w, b) = net.layers[i].params_mut().unwrap();
            for (p, (gr, (mi, vi))) in [(w, (&g.weights, (&mut m.weights, &mut v.weights))), (b, (&g.bias, (&mut m.bias, &mut v.bias)))] {
                for j in 0..p.len() {
                    mi[j] = BETA1 * mi[j] + (1.0 - BETA1) * gr[j];
                    vi[j] = BETA2 * vi[j] + (1.0 - BETA2) * gr[j] * gr[j];
                    p[j] -= lr * (mi[j] / c1) / ((vi[j] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

fn sgd_update(net: &mut Network, grads: &[Option<ParamGrad>], lr: f64) {
    for (i, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        let (w, b) = net.layers[i].params_mut().unwrap();
        for (p, gr) in w.iter_mut().zip(&g.weights).chain(b.iter_mut().zip(&g.bias)) {
            *p -= lr * gr;
        }
    }
}

fn check_dataset(net: &Network, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("training dataset".into()));
    }
    net.check_input(data.signal_length())?;
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= net.num_classes()) {
        return Err(Error::InvalidClass {
            class: bad,
            num_classes: net.num_classes(),
        });
    }
    Ok(())
}

/// Minibatch softmax cross-entropy training. Batch order and any randomness
/// derive from `cfg.seed`, so identical inputs give identical parameters.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_dataset(net, data)?;
    let (train_idx, test_idx) = data.split(cfg.test_fraction);
    if train_idx.is_empty() {
        return Err(Error::Empty("training split".into()));
    }
    let n = net.input_length();
    let c = net.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = train_idx.clone();
    let mut adam = Adam::new(net);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut batch_x = Vec::with_capacity(cfg.batch_size * n);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            batch_x.clear();
            for &i in chunk {
                batch_x.extend_from_slice(data.signal(i));
            }
            let acts = net.forward_batch_trace(&batch_x, b)?;
            let logits = acts.last().unwrap();
            let mut grad = vec![0.0; b * c];
            for (r, &i) in chunk.iter().enumerate() {
                let row = &logits[r * c..(r + 1) * c];
                let p = softmax(row);
                let y = data.label(i);
                loss_sum -= p[y].max(f64::MIN_POSITIVE).ln();
                if argmax(row) == y {
                    correct += 1;
                }
                for k in 0..c {
                    grad[r * c + k] = (p[k] - if k == y { 1.0 } else { 0.0 }) / b as f64;
                }
            }
            let mut grads: Vec<Option<ParamGrad>> = net.layers.iter().map(ParamGrad::zeros_like).collect();
            net.backward_from(&acts, b, grad, Some(&mut grads));
            match cfg.optimizer {
                Optimizer::Adam => adam.update(net, &grads, cfg.learning_rate),
                Optimizer::Sgd => sgd_update(net, &grads, cfg.learning_rate),
            }
            if cfg.weight_decay > 0.0 {
                let keep = 1.0 - cfg.learning_rate * cfg.weight_decay;
                for layer in &mut net.layers {
                    if let Some((w, _)) = layer.params_mut() {
                        w.iter_mut().for_each(|v| *v *= keep);
                    }
                }
            }
        }
        let loss = loss_sum / order.len() as f64;
        if !loss.is_finite() {
            return Err(Error::TrainingFailure(format!("loss became {loss} in epoch {epoch}")));
        }
        epochs.push(EpochStats {
            epoch,
            loss,
            train_accuracy: correct as f64 / order.len() as f64,
        });
    }

    if net.layers.iter().filter_map(|l| l.params()).any(|(w, b)| w.iter().chain(b).any(|v| !v.is_finite())) {
        return Err(Error::TrainingFailure("parameters diverged".into()));
    }
    let train_accuracy = accuracy(net, data, &train_idx)?;
    let test_accuracy = if test_idx.is_empty() {
        None
    } else {
        Some(accuracy(net, data, &test_idx)?)
    };
    Ok(TrainReport {
        epochs,
        train_samples: train_idx.len(),
        test_samples: test_idx.len(),
        train_accuracy,
        test_accuracy,
    })
}

/// Fraction of the indexed samples whose argmax logit equals the label.
pub fn accuracy(net: &Network, data: &Dataset, indices: &[usize]) -> Result<f64> {
    check_dataset(net, data)?;
    if indices.is_empty() {
        return Err(Error::Empty("accuracy index set".into()));
    }
    let c = net.num_classes();
    let mut correct = 0usize;
    let mut buf = Vec::new();
    for chunk in indices.chunks(256) {
        buf.clear();
        for &i in chunk {
            buf.extend_from_slice(data.signal(i));
        }
        let logits = net.forward_batch(&buf, chunk.len())?;
        correct += chunk
            .iter()
            .enumerate()
            .filter(|(r, &i)| argmax(&logits[r * c..(r + 1) * c]) == data.label(i))
            .count();
    }
    Ok(correct as f64 / indices.len() as f64)
}
