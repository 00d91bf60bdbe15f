//! Supervised fitting of the surrogate network by minibatch gradient descent
//! on the mean squared error.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::nnet::{LayerGradient, Network};
use crate::rng::SeededRng;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchSize {
    Size(usize),
    /// Serialized as the string `"full"`.
    Full(FullBatch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullBatch {
    Full,
}

impl BatchSize {
    pub const FULL: BatchSize = BatchSize::Full(FullBatch::Full);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub optimizer: Optimizer,
    /// Fraction of samples held out for validation, in `[0, 1)`.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Stop after this many epochs without validation improvement. Off by default.
    #[serde(default)]
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: BatchSize::Size(32),
            optimizer: Optimizer::adam(),
            validation_fraction: 0.2,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == BatchSize::Size(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) {
                return Err(Error::Config(
                    "adam needs beta1, beta2 in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, accumulated over its minibatches.
    pub loss_history: Vec<f64>,
    /// MSE on the held-out split, or on the training split when nothing is held out.
    pub validation_mse: f64,
    pub epochs_run: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Splits `0..n` into shuffled (train, validation) index sets.
fn split(n: usize, fraction: f64, rng: &mut SeededRng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_val = (n as f64 * fraction).floor() as usize;
    let train = idx.split_off(n_val);
    (train, idx)
}

fn to_scalar<T: Scalar>(row: &[f64]) -> Vec<T> {
    row.iter().map(|&v| T::of(v)).collect()
}

/// Mean squared error of `net` over the given sample indices.
pub fn dataset_mse<T: Scalar>(net: &Network<T>, data: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for &i in indices {
        let (x, y) = data.sample(i)?;
        let r = net.forward(&to_scalar::<T>(x))?.as_f64() - y;
        total += r * r;
    }
    Ok(total / indices.len() as f64)
}

struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

fn zero_grads<T: Scalar>(net: &Network<T>) -> Vec<LayerGradient<T>> {
    net.layers()
        .iter()
        .map(|l| LayerGradient {
            weights: vec![T::zero(); l.weights().len()],
            bias: vec![T::zero(); l.bias().len()],
        })
        .collect()
}

fn apply_update<T: Scalar>(
    net: &mut Network<T>,
    grads: &[LayerGradient<T>],
    lr: T,
    optimizer: Optimizer,
    adam: &mut AdamState<T>,
) -> Result<()> {
    let flat = grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.bias).copied());
    match optimizer {
        Optimizer::Sgd => {
            let mut it = flat;
            net.for_each_parameter_mut(|p| *p -= lr * it.next().expect("gradient layout"))
        }
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            adam.step += 1;
            let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
            let c1 = T::one() - b1.powi(adam.step);
            let c2 = T::one() - b2.powi(adam.step);
            for ((g, m), v) in flat.zip(adam.m.iter_mut()).zip(adam.v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
            }
            let mut k = 0;
            net.for_each_parameter_mut(|p| {
                let m_hat = adam.m[k] / c1;
                let v_hat = adam.v[k] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            })
        }
    }
}

/// Fits `net` to `data` by minimizing the mean squared error.
///
/// Sample order and the validation split are drawn from `cfg.seed`, so a
/// fixed configuration reproduces the same parameters bit-for-bit.
pub fn train<T: Scalar>(
    mut net: Network<T>,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Network<T>, TrainReport)> {
    cfg.validate()?;
    if net.is_frozen() {
        return Err(Error::Frozen);
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_dim() {
        return Err(Error::Shape {
            expected: net.input_dim(),
            got: data.dim(),
        });
    }
    let mut rng = SeededRng::new(cfg.seed);
    let (mut train_idx, val_idx) = split(data.len(), cfg.validation_fraction, &mut rng);
    if train_idx.is_empty() {
        return Err(Error::Config(
            "validation split leaves no training samples".into(),
        ));
    }
    let batch = match cfg.batch_size {
        BatchSize::Full(_) => train_idx.len(),
        BatchSize::Size(b) if b <= train_idx.len() => b,
        BatchSize::Size(b) => {
            return Err(Error::Config(format!(
                "batch_size {b} exceeds the {} training samples",
                train_idx.len()
            )))
        }
    };
    let eval_idx = if val_idx.is_empty() {
        &train_idx
    } else {
        &val_idx
    }
    .clone();

    let inputs: Vec<Vec<T>> = data.inputs().iter().map(|r| to_scalar(r)).collect();
    let targets: Vec<T> = data.outputs().iter().map(|&y| T::of(y)).collect();
    let lr = T::of(cfg.learning_rate);
    let n_params = net.num_parameters();
    let mut adam = AdamState {
        m: vec![T::zero(); n_params],
        v: vec![T::zero(); n_params],
        step: 0,
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut train_idx);
        let mut epoch_loss = 0.0;
        for chunk in train_idx.chunks(batch) {
            let scale = T::of(2.0 / chunk.len() as f64);
            let mut acc = zero_grads(&net);
            for &i in chunk {
                let trace = net
                    .trace(&inputs[i])
                    .map_err(|_| Error::Divergence { epoch })?;
                let r = trace.output() - targets[i];
                epoch_loss += (r * r).as_f64();
                let g = net.backprop(&trace, scale * r, true);
                for (a, l) in acc.iter_mut().zip(&g.layers) {
                    a.weights
                        .iter_mut()
                        .zip(&l.weights)
                        .for_each(|(s, &d)| *s += d);
                    a.bias.iter_mut().zip(&l.bias).for_each(|(s, &d)| *s += d);
                }
            }
            apply_update(&mut net, &acc, lr, cfg.optimizer, &mut adam)?;
        }
        let mean = epoch_loss / train_idx.len() as f64;
        if !mean.is_finite() || !net.parameters().all(|p| p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.push(mean);
        if let Some(patience) = cfg.patience {
            let val =
                dataset_mse(&net, data, &eval_idx).map_err(|_| Error::Divergence { epoch })?;
            if val < best_val {
                best_val = val;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }

    let validation_mse = dataset_mse(&net, data, &eval_idx)?;
    let report = TrainReport {
        epochs_run: history.len(),
        loss_history: history,
        validation_mse,
        train_size: train_idx.len(),
        validation_size: val_idx.len(),
    };
    Ok((net, report))
}

/// Freezes the trained parameters. Idempotent.
pub fn freeze<T: Scalar>(net: Network<T>) -> Network<T> {
    net.freeze()
}
