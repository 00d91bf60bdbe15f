//! Input-space descent on a frozen network.
//!
//! With the parameters fixed, the input vector becomes the trainable
//! variable and is updated as `x <- x - alpha * grad_x L` for a composite
//! loss `L`. The best iterate seen is returned, which is not necessarily the
//! last one: fixed steps can overshoot near the kinks of piecewise penalties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::losses::{composite_eval, CompositeLoss};
use crate::nnet::Network;
use crate::rng::SeededRng;
use crate::scalar::norm2;
use crate::{Error, Result, Scalar};

/// How the starting vector of a descent is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal draws clamped into `[lo, hi]`.
    NormalClipped {
        mean: f64,
        std: f64,
        lo: f64,
        hi: f64,
    },
    /// A training input; restart `r` uses sample `(index + r) % n`.
    FromData {
        index: usize,
    },
    Explicit {
        x: Vec<f64>,
    },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::NormalClipped {
            mean: 0.0,
            std: 0.5,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

impl InitStrategy {
    fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            InitStrategy::Uniform { lo, hi } | InitStrategy::NormalClipped { lo, hi, .. }
                if !(lo < hi) =>
            {
                Err(Error::Config(format!(
                    "init range needs lo < hi, got [{lo}, {hi}]"
                )))
            }
            InitStrategy::NormalClipped { std, .. } if !(std >= 0.0) => {
                Err(Error::Config("init std must be nonnegative".into()))
            }
            InitStrategy::Explicit { ref x } if x.len() != dim => Err(Error::Shape {
                expected: dim,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Draws a starting vector of length `dim`.
pub fn init_input<T: Scalar>(
    strategy: &InitStrategy,
    dim: usize,
    data: Option<&Dataset>,
    seed: u64,
) -> Result<Vec<T>> {
    init_for_restart(strategy, dim, data, seed, 0)
}

fn init_for_restart<T: Scalar>(
    strategy: &InitStrategy,
    dim: usize,
    data: Option<&Dataset>,
    seed: u64,
    restart: usize,
) -> Result<Vec<T>> {
    strategy.validate(dim)?;
    let mut rng = SeededRng::new(seed);
    let x: Vec<f64> = match *strategy {
        InitStrategy::Uniform { lo, hi } => (0..dim).map(|_| rng.uniform(lo, hi)).collect(),
        InitStrategy::NormalClipped { mean, std, lo, hi } => (0..dim)
            .map(|_| rng.normal(mean, std).clamp(lo, hi))
            .collect(),
        InitStrategy::FromData { index } => {
            let data = data
                .ok_or_else(|| Error::Config("from_data initialization needs a dataset".into()))?;
            if index >= data.len() {
                return Err(Error::IndexOutOfRange {
                    index,
                    len: data.len(),
                });
            }
            if data.dim() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    got: data.dim(),
                });
            }
            data.sample((index + restart) % data.len())?.0.to_vec()
        }
        InitStrategy::Explicit { ref x } => x.clone(),
    };
    Ok(x.into_iter().map(T::of).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InputOptimizer {
    /// Fixed-step descent `x <- x - alpha * grad`.
    GradientDescent,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtremalConfig {
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the Euclidean norm of the gradient is at most this.
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub record_trajectory: bool,
    pub optimizer: InputOptimizer,
}

impl Default for ExtremalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            max_iters: 20_000,
            grad_tol: 1e-6,
            restarts: 1,
            seed: 0,
            record_trajectory: false,
            optimizer: InputOptimizer::GradientDescent,
        }
    }
}

impl ExtremalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be a nonnegative number".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Config("grad_tol must be nonnegative".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every iteration below this index is recorded; later ones every tenth.
const DENSE_TRAJECTORY: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<T> {
    pub iter: usize,
    pub x: Vec<T>,
    pub y: T,
    pub loss: T,
}

/// Outcome of one restart, kept for every restart of a multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    pub x_init: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub y_hat: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalResult<T> {
    pub x_hat: Vec<T>,
    /// `forward(net, x_hat)`, recomputed on return.
    pub y_hat: T,
    pub final_loss: T,
    /// Number of update steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub x_init: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint<T>>>,
    pub best_restart: usize,
    pub restart_results: Vec<RestartSummary>,
}

fn check_problem<T: Scalar>(
    net: &Network<T>,
    loss: &CompositeLoss<T>,
    cfg: &ExtremalConfig,
) -> Result<()> {
    cfg.validate()?;
    if !net.is_frozen() {
        return Err(Error::NotFrozen);
    }
    loss.check_dim(net.input_dim())
}

fn descend<T: Scalar>(
    net: &Network<T>,
    loss: &CompositeLoss<T>,
    cfg: &ExtremalConfig,
    x_init: Vec<T>,
) -> Result<ExtremalResult<T>> {
    let alpha = T::of(cfg.alpha);
    let tol = T::of(cfg.grad_tol);
    let mut x = x_init.clone();
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut best: Option<(T, Vec<T>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut moments = match cfg.optimizer {
        InputOptimizer::Adam { .. } => Some((vec![T::zero(); x.len()], vec![T::zero(); x.len()])),
        InputOptimizer::GradientDescent => None,
    };

    for iter in 0..=cfg.max_iters {
        let eval = composite_eval(net, &x, loss).map_err(|e| match e {
            Error::Numeric(_) => Error::NonFiniteIterate { iteration: iter },
            other => other,
        })?;
        if !eval.value.is_finite() || !eval.grad_x.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteIterate { iteration: iter });
        }
        if let Some(traj) = trajectory.as_mut() {
            if iter < DENSE_TRAJECTORY || iter % 10 == 0 {
                traj.push(TrajectoryPoint {
                    iter,
                    x: x.clone(),
                    y: eval.y,
                    loss: eval.value,
                });
            }
        }
        if best.as_ref().is_none_or(|(l, _)| eval.value < *l) {
            best = Some((eval.value, x.clone()));
        }
        if norm2(&eval.grad_x) <= tol {
            converged = true;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }
        match (cfg.optimizer, moments.as_mut()) {
            (
                InputOptimizer::Adam {
                    beta1,
                    beta2,
                    epsilon,
                },
                Some((m, v)),
            ) => {
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
                let t = (iter + 1) as i32;
                let (c1, c2) = (T::one() - b1.powi(t), T::one() - b2.powi(t));
                for ((xi, &g), (mi, vi)) in x
                    .iter_mut()
                    .zip(&eval.grad_x)
                    .zip(m.iter_mut().zip(v.iter_mut()))
                {
                    *mi = b1 * *mi + (T::one() - b1) * g;
                    *vi = b2 * *vi + (T::one() - b2) * g * g;
                    *xi -= alpha * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
            _ => {
                for (xi, &g) in x.iter_mut().zip(&eval.grad_x) {
                    *xi -= alpha * g;
                }
            }
        }
        iterations += 1;
    }

    let (_, x_hat) = best.expect("at least one evaluation");
    let y_hat = net.forward(&x_hat)?;
    let final_loss = loss.value_at(&x_hat, y_hat);
    Ok(ExtremalResult {
        x_hat,
        y_hat,
        final_loss,
        iterations,
        converged,
        x_init,
        trajectory,
        best_restart: 0,
        restart_results: Vec::new(),
    })
}

fn summarize<T: Scalar>(restart: usize, seed: u64, r: &ExtremalResult<T>) -> RestartSummary {
    let wide = |v: &[T]| v.iter().map(|a| a.as_f64()).collect();
    RestartSummary {
        restart,
        seed,
        x_init: wide(&r.x_init),
        x_hat: wide(&r.x_hat),
        y_hat: r.y_hat.as_f64(),
        final_loss: r.final_loss.as_f64(),
        iterations: r.iterations,
        converged: r.converged,
        error: None,
    }
}

fn run_restart<T: Scalar>(
    net: &Network<T>,
    loss: &CompositeLoss<T>,
    cfg: &ExtremalConfig,
    strategy: &InitStrategy,
    data: Option<&Dataset>,
    restart: usize,
) -> Result<ExtremalResult<T>> {
    let seed = cfg.seed.wrapping_add(restart as u64);
    let x0 = init_for_restart(strategy, net.input_dim(), data, seed, restart)?;
    let mut result = descend(net, loss, cfg, x0)?;
    result.best_restart = restart;
    result.restart_results = vec![summarize(restart, seed, &result)];
    Ok(result)
}

/// Single descent from the start vector drawn with `cfg.seed`.
/// `cfg.restarts` is ignored.
pub fn extremize<T: Scalar>(
    net: &Network<T>,
    loss: &CompositeLoss<T>,
    cfg: &ExtremalConfig,
    strategy: &InitStrategy,
    data: Option<&Dataset>,
) -> Result<ExtremalResult<T>> {
    check_problem(net, loss, cfg)?;
    run_restart(net, loss, cfg, strategy, data, 0)
}

/// Runs `cfg.restarts` descents seeded `seed, seed + 1, ...` in parallel and
/// keeps the one with the lowest final loss (ties go to the lower restart
/// index). A failed restart is recorded in the summaries; the call fails
/// only when every restart fails.
pub fn multi_start<T: Scalar>(
    net: &Network<T>,
    loss: &CompositeLoss<T>,
    cfg: &ExtremalConfig,
    strategy: &InitStrategy,
    data: Option<&Dataset>,
) -> Result<ExtremalResult<T>> {
    check_problem(net, loss, cfg)?;
    let runs: Vec<Result<ExtremalResult<T>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(net, loss, cfg, strategy, data, r))
        .collect();

    let summaries: Vec<RestartSummary> = runs
        .iter()
        .enumerate()
        .map(|(r, run)| match run {
            Ok(res) => res.restart_results[0].clone(),
            Err(e) => RestartSummary {
                restart: r,
                seed: cfg.seed.wrapping_add(r as u64),
                x_init: Vec::new(),
                x_hat: Vec::new(),
                y_hat: f64::NAN,
                final_loss: f64::NAN,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .filter_map(|(r, run)| run.as_ref().ok().map(|res| (r, res.final_loss)))
        .fold(None, |acc: Option<(usize, T)>, (r, l)| match acc {
            Some((_, bl)) if bl <= l => acc,
            _ => Some((r, l)),
        });

    match best {
        Some((r, _)) => {
            let mut result = runs
                .into_iter()
                .nth(r)
                .expect("index in range")
                .expect("best run succeeded");
            result.best_restart = r;
            result.restart_results = summaries;
            Ok(result)
        }
        None => Err(runs
            .into_iter()
            .next()
            .expect("restarts >= 1")
            .expect_err("all restarts failed")),
    }
}
