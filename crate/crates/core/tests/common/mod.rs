//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use extremal::nnet::{init_network, Activation, Network};
use extremal::rng::SeededRng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-7;

/// Central difference of a scalar function of a vector, per component.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Relative error with an absolute floor near zero.
pub fn grad_close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_TOL || diff <= REL_TOL * analytic.abs().max(numeric.abs())
}

/// Worst component of a gradient comparison, as (index, analytic, numeric).
pub fn first_mismatch(analytic: &[f64], numeric: &[f64]) -> Option<(usize, f64, f64)> {
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .find(|(_, (a, n))| !grad_close(**a, **n))
        .map(|(i, (a, n))| (i, *a, *n))
}

fn act(kind: Activation, z: f64) -> f64 {
    match kind {
        Activation::Identity => z,
        Activation::Tanh => z.tanh(),
        Activation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Softplus => (1.0 + z.exp()).ln(),
    }
}

/// Naive layer-by-layer evaluation through the public accessors.
#[allow(clippy::needless_range_loop)]
pub fn naive_forward(net: &Network<f64>, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    for layer in net.layers() {
        let mut next = Vec::new();
        for r in 0..layer.fan_out() {
            let mut z = layer.bias()[r];
            for c in 0..layer.fan_in() {
                z += layer.weight(r, c) * a[c];
            }
            next.push(act(layer.activation(), z));
        }
        a = next;
    }
    a[0]
}

/// Random dense network whose hidden layers all use `kind`, with an
/// identity output layer and nonzero biases.
pub fn random_network(rng: &mut SeededRng, kind: Activation) -> Network<f64> {
    let input_dim = 1 + rng.index(5);
    let depth = 1 + rng.index(3);
    let mut spec: Vec<(usize, Activation)> =
        (0..depth - 1).map(|_| (1 + rng.index(6), kind)).collect();
    spec.push((
        1,
        if depth == 1 {
            kind
        } else {
            Activation::Identity
        },
    ));
    let mut net = init_network(&spec, input_dim, rng.index(1 << 30) as u64).unwrap();
    let scale = 1.5;
    net.for_each_parameter_mut(|p| *p *= scale).unwrap();
    for l in 0..net.layers().len() {
        for r in 0..net.layers()[l].fan_out() {
            net.set_bias(l, r, rng.uniform(-0.5, 0.5)).unwrap();
        }
    }
    net
}

pub fn random_vector(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

/// Smallest |z| over all pre-activations at `x`.
pub fn min_abs_preactivation(net: &Network<f64>, x: &[f64]) -> f64 {
    net.trace(x)
        .unwrap()
        .pre_activations()
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, z| m.min(z.abs()))
}

/// Finite-difference gradient of `f` with respect to every parameter, in
/// `Network::parameters` order.
pub fn parameter_fd(net: &Network<f64>, x: &[f64]) -> Vec<f64> {
    let n = net.num_parameters();
    (0..n)
        .map(|k| {
            let eval = |delta: f64| {
                let mut p = net.unfrozen();
                let mut i = 0;
                p.for_each_parameter_mut(|v| {
                    if i == k {
                        *v += delta;
                    }
                    i += 1;
                })
                .unwrap();
                p.forward(x).unwrap()
            };
            (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Draws a network/input pair away from relu kinks.
pub fn gradient_case(rng: &mut SeededRng, kind: Activation) -> (Network<f64>, Vec<f64>) {
    loop {
        let net = random_network(rng, kind);
        let x = random_vector(rng, net.input_dim(), -2.0, 2.0);
        if kind != Activation::Relu || min_abs_preactivation(&net, &x) > 1e-3 {
            return (net, x);
        }
    }
}

/// Checks input and parameter gradients of one case; returns a description
/// of the first mismatch.
pub fn check_network_gradients(net: &Network<f64>, x: &[f64]) -> Result<(), String> {
    let g = net.backward(x, 1.0).map_err(|e| e.to_string())?;
    let fd_x = central_diff(|v| net.forward(v).unwrap(), x, FD_STEP);
    if let Some((i, a, n)) = first_mismatch(&g.input, &fd_x) {
        return Err(format!("input component {i}: analytic {a} vs numeric {n}"));
    }
    let fd_p = parameter_fd(net, x);
    if let Some((i, a, n)) = first_mismatch(&g.flat_parameters(), &fd_p) {
        return Err(format!("parameter {i}: analytic {a} vs numeric {n}"));
    }
    Ok(())
}
