//! Dense feed-forward regression network with analytic reverse-mode
//! gradients with respect to both parameters and inputs.
//!
//! Every layer computes `a' = act(W a + b)` with `W` stored row-major as
//! `fan_out x fan_in`. The last layer has a single output unit, so the
//! network is a scalar function `f(theta; x)` of its input vector.

mod activation;
mod persist;

pub use activation::Activation;
pub use persist::{
    load_model, model_from_json, model_to_json, save_model, LayerRecord, ModelFile,
    MODEL_FORMAT_VERSION,
};

use crate::rng::SeededRng;
use crate::scalar::all_finite;
use crate::{Error, Result, Scalar};

/// One dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    fan_in: usize,
    fan_out: usize,
    /// Row-major, `fan_out x fan_in`.
    weights: Vec<T>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(
        fan_in: usize,
        fan_out: usize,
        weights: Vec<T>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidSpec(format!(
                "layer dimensions must be positive, got {fan_out}x{fan_in}"
            )));
        }
        if bias.len() != fan_out {
            return Err(Error::Consistency(format!(
                "bias has {} entries but the layer has {fan_out} rows",
                bias.len()
            )));
        }
        if weights.len() != fan_in * fan_out {
            return Err(Error::Consistency(format!(
                "weights have {} entries, expected {fan_out}x{fan_in}",
                weights.len()
            )));
        }
        if !all_finite(&weights) || !all_finite(&bias) {
            return Err(Error::Numeric("layer parameters must be finite".into()));
        }
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.fan_in + col]
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Writes `z = W a + b` into `pre` and `act(z)` into `out`.
    fn apply(&self, input: &[T], pre: &mut Vec<T>, out: &mut Vec<T>) {
        pre.clear();
        out.clear();
        for (row, &b) in self.weights.chunks_exact(self.fan_in).zip(&self.bias) {
            let z = row
                .iter()
                .zip(input)
                .fold(b, |acc, (&w, &a)| w.mul_add(a, acc));
            pre.push(z);
            out.push(self.activation.value(z));
        }
    }
}

/// Gradient of a scalar with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    /// Same layout as [`Layer::weights`].
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Result of a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    /// Per-layer parameter gradients; empty when only the input gradient
    /// was requested.
    pub layers: Vec<LayerGradient<T>>,
    pub input: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Parameter gradients flattened in [`Network::parameters`] order.
    pub fn flat_parameters(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
            .collect()
    }
}

/// Intermediate values of a forward pass, consumed by [`Network::backprop`].
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `inputs[k]` is the input to layer `k`; `inputs[0]` is `x`.
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    output: T,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> T {
        self.output
    }

    pub fn input(&self) -> &[T] {
        &self.inputs[0]
    }

    /// Pre-activation vectors `z = W a + b`, one per layer.
    pub fn pre_activations(&self) -> &[Vec<T>] {
        &self.pre
    }
}

/// A dense feed-forward network with scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    input_dim: usize,
    layers: Vec<Layer<T>>,
    frozen: bool,
}

impl<T: Scalar> Network<T> {
    /// Assembles a network, checking the fan-in chain and the scalar output.
    pub fn new(input_dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::InvalidSpec(
                "network needs at least one layer".into(),
            ));
        };
        if last.fan_out != 1 {
            return Err(Error::Consistency(format!(
                "final layer must have one output, has {}",
                last.fan_out
            )));
        }
        let mut fan_in = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.fan_in != fan_in {
                return Err(Error::Consistency(format!(
                    "layer {k} expects {} inputs but receives {fan_in}",
                    layer.fan_in
                )));
            }
            fan_in = layer.fan_out;
        }
        Ok(Self {
            input_dim,
            layers,
            frozen: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Marks the parameters immutable. Idempotent.
    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    /// Returns a mutable copy, e.g. to continue training a loaded snapshot.
    pub fn unfrozen(&self) -> Self {
        Self {
            frozen: false,
            ..self.clone()
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(Layer::num_parameters).sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn parameters(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    /// FNV-1a hash over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.parameters() {
            for byte in p.as_f64().to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    fn check_mutable(&self) -> Result<()> {
        if self.frozen {
            Err(Error::Frozen)
        } else {
            Ok(())
        }
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: T) -> Result<()> {
        self.check_mutable()?;
        let l = &mut self.layers[layer];
        assert!(
            row < l.fan_out && col < l.fan_in,
            "weight index out of range"
        );
        l.weights[row * l.fan_in + col] = value;
        Ok(())
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, value: T) -> Result<()> {
        self.check_mutable()?;
        self.layers[layer].bias[row] = value;
        Ok(())
    }

    /// Visits every parameter mutably, in [`Network::parameters`] order.
    pub fn for_each_parameter_mut(&mut self, mut f: impl FnMut(&mut T)) -> Result<()> {
        self.check_mutable()?;
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
            .for_each(&mut f);
        Ok(())
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::Numeric("input contains non-finite entries".into()));
        }
        Ok(())
    }

    /// Forward pass retaining the intermediates needed for backprop.
    pub fn trace(&self, x: &[T]) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.fan_out);
            let mut a = Vec::with_capacity(layer.fan_out);
            layer.apply(&inputs[k], &mut z, &mut a);
            if !all_finite(&a) {
                return Err(Error::Numeric(format!(
                    "layer {k} produced a non-finite value"
                )));
            }
            pre.push(z);
            inputs.push(a);
        }
        let output = inputs.pop().expect("at least one layer")[0];
        Ok(Trace {
            inputs,
            pre,
            output,
        })
    }

    /// Evaluates `f(theta; x)`.
    pub fn forward(&self, x: &[T]) -> Result<T> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let mut pre = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut pre, &mut next);
            if !all_finite(&next) {
                return Err(Error::Numeric(format!(
                    "layer {k} produced a non-finite value"
                )));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur[0])
    }

    /// Reverse pass for `upstream * f` over a recorded trace. Parameter
    /// gradients are only accumulated when `with_parameters` is set.
    pub fn backprop(&self, trace: &Trace<T>, upstream: T, with_parameters: bool) -> Gradients<T> {
        let mut layer_grads = Vec::with_capacity(if with_parameters {
            self.layers.len()
        } else {
            0
        });
        let mut delta = vec![upstream];
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let a_in = &trace.inputs[k];
            let dz: Vec<T> = delta
                .iter()
                .zip(&trace.pre[k])
                .map(|(&d, &z)| d * layer.activation.derivative(z))
                .collect();
            if with_parameters {
                let mut gw = Vec::with_capacity(layer.weights.len());
                for &d in &dz {
                    gw.extend(a_in.iter().map(|&a| d * a));
                }
                layer_grads.push(LayerGradient {
                    weights: gw,
                    bias: dz.clone(),
                });
            }
            let mut prev = vec![T::zero(); layer.fan_in];
            for (row, &d) in layer.weights.chunks_exact(layer.fan_in).zip(&dz) {
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p = w.mul_add(d, *p);
                }
            }
            delta = prev;
        }
        layer_grads.reverse();
        Gradients {
            layers: layer_grads,
            input: delta,
        }
    }

    /// Exact gradients of `upstream * f(theta; x)` with respect to every
    /// parameter and to `x`.
    pub fn backward(&self, x: &[T], upstream: T) -> Result<Gradients<T>> {
        let trace = self.trace(x)?;
        Ok(self.backprop(&trace, upstream, true))
    }

    /// `(f(x), df/dx)` without parameter gradients.
    pub fn value_and_input_gradient(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        let trace = self.trace(x)?;
        let g = self.backprop(&trace, T::one(), false);
        Ok((trace.output, g.input))
    }
}

/// Builds a network from `(width, activation)` pairs. Weights are drawn
/// uniformly from `+-sqrt(6 / (fan_in + fan_out))` using a generator seeded
/// with `seed`; biases start at zero.
pub fn init_network<T: Scalar>(
    spec: &[(usize, Activation)],
    input_dim: usize,
    seed: u64,
) -> Result<Network<T>> {
    if spec.is_empty() {
        return Err(Error::InvalidSpec("layer list is empty".into()));
    }
    if input_dim == 0 {
        return Err(Error::InvalidSpec("input_dim must be positive".into()));
    }
    if let Some((k, _)) = spec.iter().enumerate().find(|(_, (w, _))| *w == 0) {
        return Err(Error::InvalidSpec(format!("layer {k} has zero width")));
    }
    if spec.last().map(|s| s.0) != Some(1) {
        return Err(Error::InvalidSpec("final layer width must be 1".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut fan_in = input_dim;
    let mut layers = Vec::with_capacity(spec.len());
    for &(fan_out, activation) in spec {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..fan_in * fan_out)
            .map(|_| T::of(rng.uniform(-limit, limit)))
            .collect();
        layers.push(Layer::new(
            fan_in,
            fan_out,
            weights,
            vec![T::zero(); fan_out],
            activation,
        )?);
        fan_in = fan_out;
    }
    Network::new(input_dim, layers)
}

/// Architecture used for the toy problem: two hidden tanh layers of width 64.
pub fn default_architecture() -> Vec<(usize, Activation)> {
    vec![
        (64, Activation::Tanh),
        (64, Activation::Tanh),
        (1, Activation::Identity),
    ]
}
