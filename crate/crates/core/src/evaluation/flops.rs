//! Per-pixel floating-point operation counts.
//!
//! A complex multiply-accumulate costs 8 real FLOPs (4 multiplies and 2 adds
//! for the product, 2 adds to accumulate); a real one costs 2. Transcendental
//! and square-root evaluations count as one FLOP each. Input normalization
//! is shared by every method and is not counted.
//!
//! | step                                  | complex | real |
//! |---------------------------------------|---------|------|
//! | dense layer, per weight               | 8       | 2    |
//! | bias, per unit                        | 2       | 1    |
//! | batch norm (inference), per unit      | 12      | 4    |
//! | cardioid / siglog / sep. sigmoid / ReLU | 9 / 7 / 10 | 1 |
//!
//! Nearest-neighbor matching costs one complex inner product (`8T`) plus a
//! squared modulus and a comparison (4) per dictionary entry.

use crate::activations::ActivationKind;
use crate::network::{NetworkConfig, NetworkKind};

#[derive(Clone, Debug, PartialEq)]
pub enum MethodDescriptor {
    NearestNeighbor { entries: usize, signal_len: usize },
    Network(NetworkConfig),
}

pub fn activation_flops(kind: ActivationKind) -> u64 {
    match kind {
        // |z| (3), cos∠z = re/|z| (1), 1 + · (1), ½· (1), scaling z (2), plus
        // the zero guard (1).
        ActivationKind::Cardioid => 9,
        // |z| (3), 1 + · (1), z / · (2), zero guard (1).
        ActivationKind::Siglog => 7,
        // Two logistic functions: exp, add, divide, negate, plus a compare.
        ActivationKind::SeparableSigmoid => 10,
        ActivationKind::RealRelu => 1,
    }
}

/// One network layer's cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerFlops {
    pub fan_in: usize,
    pub fan_out: usize,
    pub flops: u64,
}

/// Per-layer costs, hidden layers first and the scalar head last.
pub fn network_breakdown(cfg: &NetworkConfig) -> Vec<LayerFlops> {
    let complex = cfg.kind == NetworkKind::Complex;
    let (mac, bias, norm) = if complex { (8, 2, 12) } else { (2, 1, 4) };
    let act = activation_flops(cfg.activation);
    let mut fan_in = cfg.input_dim();
    let mut out = Vec::with_capacity(cfg.hidden.len() + 1);
    for &w in &cfg.hidden {
        out.push(LayerFlops {
            fan_in,
            fan_out: w,
            flops: mac * (fan_in * w) as u64 + (bias + norm + act) * w as u64,
        });
        fan_in = w;
    }
    out.push(LayerFlops {
        fan_in,
        fan_out: 1,
        flops: mac * fan_in as u64 + bias,
    });
    out
}

pub fn count_flops(method: &MethodDescriptor) -> u64 {
    match method {
        MethodDescriptor::NearestNeighbor { entries, signal_len } => *entries as u64 * (8 * *signal_len as u64 + 4),
        MethodDescriptor::Network(cfg) => network_breakdown(cfg).iter().map(|l| l.flops).sum(),
    }
}
