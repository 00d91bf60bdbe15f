//! Loss terms as `(value, derivative)` pairs and their additive composition.
//!
//! Terms are tagged by the space they act on: the extremal and
//! output-positivity terms consume the network output `y`, the extrapolation
//! and input-positivity terms consume the input `x`. A composite evaluation
//! sums the output-space derivatives first and pushes them through the
//! network in a single backward pass.
//!
//! At non-smooth points (band edges, `y = 0`, `x_i = 0`) the derivative of
//! the flat or interior branch is used.

mod constraints;

pub use constraints::{ConstraintFile, ExtrapolationSource, TermSpec};

use serde::{Deserialize, Serialize};

use crate::nnet::Network;
use crate::{Error, Result, Scalar};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse<T: Scalar>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            expected: pred.len(),
            got: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = T::of(pred.len() as f64);
    let two_over_n = T::of(2.0) / n;
    let mut value = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let r = p - t;
            value += r * r;
            two_over_n * r
        })
        .collect();
    Ok((value / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremalMode {
    #[default]
    Maximize,
    Minimize,
}

/// `1/(y^2 + kappa)` for maximization, `y^2` for minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalLossConfig<T> {
    pub mode: ExtremalMode,
    pub kappa: T,
}

impl<T: Scalar> ExtremalLossConfig<T> {
    pub fn new(mode: ExtremalMode, kappa: T) -> Result<Self> {
        if mode == ExtremalMode::Maximize && !(kappa > T::zero()) {
            return Err(Error::Config("extremal kappa must be positive".into()));
        }
        Ok(Self { mode, kappa })
    }

    pub fn maximize() -> Self {
        Self {
            mode: ExtremalMode::Maximize,
            kappa: T::one(),
        }
    }

    pub fn minimize() -> Self {
        Self {
            mode: ExtremalMode::Minimize,
            kappa: T::one(),
        }
    }
}

pub fn extremal_loss<T: Scalar>(y: T, cfg: &ExtremalLossConfig<T>) -> (T, T) {
    match cfg.mode {
        ExtremalMode::Maximize => {
            let d = y * y + cfg.kappa;
            (d.recip(), -(y + y) / (d * d))
        }
        ExtremalMode::Minimize => (y * y, y + y),
    }
}

/// Quadratic penalty on components leaving `[mu - c sigma, mu + c sigma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationConfig<T> {
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
    pub c: T,
    pub kappa1: T,
}

impl<T: Scalar> ExtrapolationConfig<T> {
    pub fn new(mu: Vec<T>, sigma: Vec<T>, c: T, kappa1: T) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::Shape {
                expected: mu.len(),
                got: sigma.len(),
            });
        }
        if sigma.iter().any(|&s| !(s >= T::zero())) {
            return Err(Error::Config("sigma entries must be nonnegative".into()));
        }
        if !(c > T::zero()) {
            return Err(Error::Config("c must be positive".into()));
        }
        if !(kappa1 >= T::zero()) {
            return Err(Error::Config("kappa1 must be nonnegative".into()));
        }
        Ok(Self {
            mu,
            sigma,
            c,
            kappa1,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Lower and upper band edges for component `i`.
    pub fn band(&self, i: usize) -> (T, T) {
        let half = self.c * self.sigma[i];
        (self.mu[i] - half, self.mu[i] + half)
    }
}

pub fn extrapolation_loss<T: Scalar>(x: &[T], cfg: &ExtrapolationConfig<T>) -> (T, Vec<T>) {
    debug_assert_eq!(x.len(), cfg.dim());
    let mut value = T::zero();
    let grad = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let (lo, hi) = cfg.band(i);
            let excess = if xi < lo {
                xi - lo
            } else if xi > hi {
                xi - hi
            } else {
                return T::zero();
            };
            value += excess * excess;
            cfg.kappa1 * (excess + excess)
        })
        .collect();
    (cfg.kappa1 * value, grad)
}

/// Output-positivity with maximization: linear penalty for `y < 0`,
/// `1/(y^2 + 1/kappa_hat)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputPositiveMaxConfig<T> {
    pub kappa2: T,
    pub kappa_hat: T,
}

impl<T: Scalar> OutputPositiveMaxConfig<T> {
    pub fn new(kappa2: T, kappa_hat: T) -> Result<Self> {
        if !(kappa2 > T::zero() && kappa_hat > T::zero()) {
            return Err(Error::Config(
                "kappa2 and kappa_hat must be positive".into(),
            ));
        }
        Ok(Self { kappa2, kappa_hat })
    }
}

impl<T: Scalar> Default for OutputPositiveMaxConfig<T> {
    fn default() -> Self {
        Self {
            kappa2: T::of(10.0),
            kappa_hat: T::one(),
        }
    }
}

pub fn output_positive_max_loss<T: Scalar>(y: T, cfg: &OutputPositiveMaxConfig<T>) -> (T, T) {
    if y < T::zero() {
        (-cfg.kappa2 * y + cfg.kappa_hat, -cfg.kappa2)
    } else {
        let d = y * y + cfg.kappa_hat.recip();
        (d.recip(), -(y + y) / (d * d))
    }
}

/// Linear penalty on negative components among `active_dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPositivityConfig<T> {
    pub kappa3: T,
    pub active_dims: Vec<usize>,
}

impl<T: Scalar> InputPositivityConfig<T> {
    pub fn new(kappa3: T, active_dims: Vec<usize>, dim: usize) -> Result<Self> {
        if !(kappa3 >= T::zero()) {
            return Err(Error::Config("kappa3 must be nonnegative".into()));
        }
        if let Some(&d) = active_dims.iter().find(|&&d| d >= dim) {
            return Err(Error::IndexOutOfRange { index: d, len: dim });
        }
        Ok(Self {
            kappa3,
            active_dims,
        })
    }

    pub fn all_dims(kappa3: T, dim: usize) -> Self {
        Self {
            kappa3,
            active_dims: (0..dim).collect(),
        }
    }
}

pub fn input_positivity_loss<T: Scalar>(x: &[T], cfg: &InputPositivityConfig<T>) -> (T, Vec<T>) {
    let mut value = T::zero();
    let mut grad = vec![T::zero(); x.len()];
    for &i in &cfg.active_dims {
        if x[i] < T::zero() {
            value -= x[i];
            grad[i] = -cfg.kappa3;
        }
    }
    (cfg.kappa3 * value, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermSpace {
    Input,
    Output,
}

/// One component of a composite loss.
#[derive(Debug, Clone, PartialEq)]
pub enum LossTerm<T> {
    Extremal(ExtremalLossConfig<T>),
    Extrapolation(ExtrapolationConfig<T>),
    OutputPositiveMax(OutputPositiveMaxConfig<T>),
    InputPositivity(InputPositivityConfig<T>),
}

impl<T: Scalar> LossTerm<T> {
    pub fn space(&self) -> TermSpace {
        match self {
            LossTerm::Extremal(_) | LossTerm::OutputPositiveMax(_) => TermSpace::Output,
            LossTerm::Extrapolation(_) | LossTerm::InputPositivity(_) => TermSpace::Input,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossTerm::Extremal(_) => "extremal",
            LossTerm::Extrapolation(_) => "extrapolation",
            LossTerm::OutputPositiveMax(_) => "output_positive_max",
            LossTerm::InputPositivity(_) => "input_positivity",
        }
    }

    /// Value of this term alone.
    pub fn value(&self, x: &[T], y: T) -> T {
        match self {
            LossTerm::Extremal(c) => extremal_loss(y, c).0,
            LossTerm::Extrapolation(c) => extrapolation_loss(x, c).0,
            LossTerm::OutputPositiveMax(c) => output_positive_max_loss(y, c).0,
            LossTerm::InputPositivity(c) => input_positivity_loss(x, c).0,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            LossTerm::Extrapolation(c) if c.dim() != dim => Err(Error::Shape {
                expected: dim,
                got: c.dim(),
            }),
            LossTerm::InputPositivity(c) => match c.active_dims.iter().find(|&&d| d >= dim) {
                Some(&d) => Err(Error::IndexOutOfRange { index: d, len: dim }),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// `L = sum_i L_i` over an ordered, nonempty list of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLoss<T> {
    terms: Vec<LossTerm<T>>,
}

/// Output of [`composite_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeValue<T> {
    pub value: T,
    pub grad_x: Vec<T>,
    pub y: T,
}

impl<T: Scalar> CompositeLoss<T> {
    pub fn new(terms: Vec<LossTerm<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config(
                "composite loss needs at least one term".into(),
            ));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[LossTerm<T>] {
        &self.terms
    }

    /// Per-term values at `(x, y)`, in term order.
    pub fn term_values(&self, x: &[T], y: T) -> Vec<T> {
        self.terms.iter().map(|t| t.value(x, y)).collect()
    }

    /// Composite value at `(x, y)` without gradients.
    pub fn value_at(&self, x: &[T], y: T) -> T {
        self.term_values(x, y).into_iter().sum()
    }

    /// Checks every term against a network input dimension.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.check_dim(dim))
    }
}

/// Value and input gradient of the composite loss at `x` on a frozen
/// network, using one forward and one backward pass.
pub fn composite_eval<T: Scalar>(
    net: &Network<T>,
    x: &[T],
    loss: &CompositeLoss<T>,
) -> Result<CompositeValue<T>> {
    if !net.is_frozen() {
        return Err(Error::NotFrozen);
    }
    loss.check_dim(net.input_dim())?;
    let trace = net.trace(x)?;
    let y = trace.output();
    let mut value = T::zero();
    let mut upstream = T::zero();
    let mut grad_x = vec![T::zero(); x.len()];
    for term in &loss.terms {
        match term {
            LossTerm::Extremal(c) => {
                let (v, d) = extremal_loss(y, c);
                value += v;
                upstream += d;
            }
            LossTerm::OutputPositiveMax(c) => {
                let (v, d) = output_positive_max_loss(y, c);
                value += v;
                upstream += d;
            }
            LossTerm::Extrapolation(c) => {
                let (v, g) = extrapolation_loss(x, c);
                value += v;
                grad_x.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            LossTerm::InputPositivity(c) => {
                let (v, g) = input_positivity_loss(x, c);
                value += v;
                grad_x.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
    }
    if upstream != T::zero() {
        let back = net.backprop(&trace, upstream, false);
        grad_x.iter_mut().zip(back.input).for_each(|(a, b)| *a += b);
    }
    Ok(CompositeValue { value, grad_x, y })
}
