mod common;

use common::gradcheck::worst_error;
use mrfnet::activations::ActivationKind;
use mrfnet::network::{build_network, Network, NetworkConfig, NetworkKind};
use mrfnet::{CMatrix, Complex, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(kind: NetworkKind, activation: ActivationKind) -> NetworkConfig {
    NetworkConfig {
        input_len: 6,
        hidden: vec![5, 4],
        activation,
        kind,
    }
}

#[test]
fn complex_networks_match_finite_differences() {
    for activation in [ActivationKind::Cardioid, ActivationKind::Siglog, ActivationKind::SeparableSigmoid] {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net: Network<Complex> = build_network(&config(NetworkKind::Complex, activation), seed).unwrap();
            let x = CMatrix::from_fn(4, 6, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let labels: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let err = worst_error(&mut net, &x, &labels);
            assert!(err < 1e-4, "{activation} seed {seed}: {err}");
        }
    }
}

#[test]
fn real_network_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net: Network<f64> = build_network(&config(NetworkKind::Real2Channel, ActivationKind::RealRelu), seed).unwrap();
        let x = Matrix::from_fn(4, 12, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let err = worst_error(&mut net, &x, &labels);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

/// Copies a real network into a complex one with zero imaginary parts.
fn complexify(net: &Network<f64>, activation: ActivationKind) -> Network<Complex> {
    let mut out: Network<Complex> = build_network(
        &NetworkConfig {
            input_len: net.input_dim(),
            hidden: net.hidden_widths(),
            activation,
            kind: NetworkKind::Complex,
        },
        0,
    )
    .unwrap();
    for (dst, src) in out.parameters_mut().zip(net.parameters()) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = Complex::from(*s);
        }
    }
    out
}

#[test]
fn real_valued_complex_network_equals_real_network() {
    let cfg = NetworkConfig {
        input_len: 8,
        hidden: vec![6, 5],
        activation: ActivationKind::RealRelu,
        kind: NetworkKind::Real2Channel,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut real: Network<f64> = build_network(&cfg, 3).unwrap();
    // Cardioid is ReLU on the real axis.
    let mut cplx = complexify(&real, ActivationKind::Cardioid);
    let x = Matrix::from_fn(5, 16, |_, _| rng.random_range(-1.0..1.0));
    let xc = CMatrix::from_fn(5, 16, |i, j| Complex::from(x.get(i, j)));
    let labels: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();

    let (lr, gr) = real.loss_and_gradients(&x, &labels).unwrap();
    let (lc, gc) = cplx.loss_and_gradients(&xc, &labels).unwrap();
    assert_eq!(lr, lc);
    for (a, b) in gr.slices().zip(gc.slices()) {
        for (p, q) in a.iter().zip(b) {
            assert_eq!(Complex::from(*p), *q);
        }
    }
    let fr = real.forward(&x).unwrap();
    let fc = cplx.forward(&xc).unwrap();
    for (p, q) in fr.iter().zip(&fc) {
        assert_eq!(Complex::from(*p), *q);
    }
}
