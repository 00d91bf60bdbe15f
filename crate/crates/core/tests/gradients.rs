mod common;

use common::*;
use extremal::nnet::{init_network, Activation, Layer, Network};
use extremal::rng::SeededRng;

#[test]
fn forward_matches_naive_walk() {
    let mut rng = SeededRng::new(100);
    for kind in Activation::ALL {
        for _ in 0..50 {
            let net = random_network(&mut rng, kind);
            let x = random_vector(&mut rng, net.input_dim(), -3.0, 3.0);
            let fast = net.forward(&x).unwrap();
            let naive = naive_forward(&net, &x);
            assert!(
                (fast - naive).abs() <= 1e-12 * naive.abs().max(1.0),
                "{kind}: {fast} vs {naive}"
            );
        }
    }
}

#[test]
fn backprop_matches_finite_differences_for_every_activation() {
    let mut rng = SeededRng::new(200);
    for kind in Activation::ALL {
        for case in 0..100 {
            let (net, x) = gradient_case(&mut rng, kind);
            if let Err(msg) = check_network_gradients(&net, &x) {
                panic!("{kind} case {case}: {msg}");
            }
        }
    }
}

#[test]
fn default_architecture_input_gradient() {
    let net: Network<f64> = init_network(&extremal::nnet::default_architecture(), 4, 9).unwrap();
    let mut rng = SeededRng::new(1);
    for _ in 0..20 {
        let x = random_vector(&mut rng, 4, -1.0, 1.0);
        let g = net.backward(&x, 1.0).unwrap();
        let fd = central_diff(|v| net.forward(v).unwrap(), &x, FD_STEP);
        assert_eq!(first_mismatch(&g.input, &fd), None);
    }
}

#[test]
fn backward_is_linear_in_upstream() {
    let mut rng = SeededRng::new(300);
    for kind in Activation::ALL {
        for _ in 0..20 {
            let net = random_network(&mut rng, kind);
            let x = random_vector(&mut rng, net.input_dim(), -2.0, 2.0);
            let c = rng.uniform(-4.0, 4.0);
            let base = net.backward(&x, 1.0).unwrap();
            let scaled = net.backward(&x, c).unwrap();
            let pairs = base
                .input
                .iter()
                .chain(&base.flat_parameters())
                .copied()
                .zip(
                    scaled
                        .input
                        .iter()
                        .chain(&scaled.flat_parameters())
                        .copied(),
                )
                .collect::<Vec<_>>();
            for (b, s) in pairs {
                let want = c * b;
                assert!(
                    (s - want).abs() <= 1e-12 * want.abs().max(1e-300),
                    "{s} vs {want}"
                );
            }
        }
    }
}

#[test]
fn forward_and_backward_are_pure() {
    let mut rng = SeededRng::new(400);
    let net = random_network(&mut rng, Activation::Tanh);
    let before = net.checksum();
    let snapshot = net.clone();
    for _ in 0..10 {
        let x = random_vector(&mut rng, net.input_dim(), -1.0, 1.0);
        net.forward(&x).unwrap();
        net.backward(&x, 0.7).unwrap();
    }
    assert_eq!(net.checksum(), before);
    assert_eq!(net, snapshot);
}

#[test]
fn zero_weight_identity_net_has_zero_input_gradient() {
    let l0 = Layer::new(3, 2, vec![0.0; 6], vec![0.4, -0.1], Activation::Identity).unwrap();
    let l1 = Layer::new(2, 1, vec![0.0; 2], vec![0.3], Activation::Identity).unwrap();
    let net = Network::new(3, vec![l0, l1]).unwrap();
    assert_eq!(
        net.backward(&[1.0, 2.0, 3.0], 1.0).unwrap().input,
        vec![0.0; 3]
    );
}

#[test]
fn shared_frozen_network_across_threads() {
    let net = init_network::<f64>(&extremal::nnet::default_architecture(), 4, 2)
        .unwrap()
        .freeze();
    let x = [0.1, 0.2, -0.3, 0.4];
    let expected = net.forward(&x).unwrap();
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(net.forward(&x).unwrap(), expected));
        }
    });
}
