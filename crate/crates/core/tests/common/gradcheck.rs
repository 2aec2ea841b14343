//! Central-difference oracle for network cogradients.
//!
//! For a real loss, `∂L/∂w̄ = ½(∂L/∂re w + i·∂L/∂im w)`; real parameters only
//! have the first term. The oracle only calls the training-mode forward pass,
//! never the backward code it checks.

use mrfnet::activations::Activation;
use mrfnet::autodiff::loss_mse;
use mrfnet::network::Network;
use mrfnet::{Complex, Matrix, Scalar};

pub const STEP: f64 = 1e-6;
/// Magnitudes below this are compared absolutely; a step of 1e-6 cannot
/// resolve differences much under 1e-10.
pub const FLOOR: f64 = 1e-4;

pub fn batch_loss<S: Activation>(net: &Network<S>, x: &Matrix<S>, labels: &[f64]) -> f64 {
    let (out, _) = net.clone().forward_train(x).expect("forward");
    out.iter().zip(labels).map(|(&o, &t)| loss_mse(o, t).0).sum::<f64>() / labels.len() as f64
}

pub trait Perturb: Scalar {
    /// Unit directions along which to differentiate, with the weight each
    /// partial derivative carries in the cogradient.
    fn directions() -> Vec<(Self, Self)>;
}

impl Perturb for f64 {
    fn directions() -> Vec<(f64, f64)> {
        vec![(1.0, 0.5)]
    }
}

impl Perturb for Complex {
    fn directions() -> Vec<(Complex, Complex)> {
        vec![
            (Complex::ONE, Complex::new(0.5, 0.0)),
            (Complex::I, Complex::new(0.0, 0.5)),
        ]
    }
}

/// Finite-difference cogradients, in `Network::parameters` order.
pub fn numeric_cogradients<S: Activation + Perturb>(net: &Network<S>, x: &Matrix<S>, labels: &[f64]) -> Vec<Vec<S>> {
    let shapes: Vec<usize> = net.parameters().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (slot, &len) in shapes.iter().enumerate() {
        let mut grads = vec![S::ZERO; len];
        for (idx, g) in grads.iter_mut().enumerate() {
            for (dir, weight) in S::directions() {
                let eval = |sign: f64| {
                    let mut probe = net.clone();
                    let p = probe.parameters_mut().nth(slot).unwrap();
                    p[idx] += dir.scale(sign * STEP);
                    batch_loss(&probe, x, labels)
                };
                let d = (eval(1.0) - eval(-1.0)) / (2.0 * STEP);
                *g += weight.scale(d);
            }
        }
        out.push(grads);
    }
    out
}

pub fn relative_error<S: Scalar>(a: S, b: S) -> f64 {
    let scale = a.norm_sqr().sqrt().max(b.norm_sqr().sqrt()).max(FLOOR);
    (a - b).norm_sqr().sqrt() / scale
}

/// Worst relative error between the analytic and numeric cogradients.
pub fn worst_error<S: Activation + Perturb>(net: &mut Network<S>, x: &Matrix<S>, labels: &[f64]) -> f64 {
    let numeric = numeric_cogradients(net, x, labels);
    let (_, grads) = net.clone().loss_and_gradients(x, labels).expect("backward");
    grads
        .slices()
        .zip(&numeric)
        .flat_map(|(a, n)| a.iter().zip(n).map(|(&p, &q)| relative_error(p, q)))
        .fold(0.0, f64::max)
}
