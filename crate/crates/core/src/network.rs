//! Fully connected regression networks: hidden blocks of
//! dense → batch norm → activation, followed by a dense layer to one output.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{Activation, ActivationKind};
use crate::autodiff::{chain, loss_mse, BatchNorm, BatchNormTape, Dense, DenseTape, StatsMode};
use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};

/// Signal length used throughout.
pub const SIGNAL_LEN: usize = 500;
pub const BASE_HIDDEN: [usize; 2] = [512, 256];
pub const WIDE_HIDDEN: [usize; 2] = [1024, 512];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    /// One complex input channel.
    Complex,
    /// Real network fed `[re…, im…]`.
    Real2Channel,
}

impl NetworkKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            NetworkKind::Complex => 0,
            NetworkKind::Real2Channel => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NetworkKind::Complex),
            1 => Some(NetworkKind::Real2Channel),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_len: usize,
    pub hidden: Vec<usize>,
    pub activation: ActivationKind,
    pub kind: NetworkKind,
}

impl NetworkConfig {
    pub fn complex(activation: ActivationKind) -> Self {
        NetworkConfig {
            input_len: SIGNAL_LEN,
            hidden: BASE_HIDDEN.to_vec(),
            activation,
            kind: NetworkKind::Complex,
        }
    }

    pub fn real(wide: bool) -> Self {
        NetworkConfig {
            input_len: SIGNAL_LEN,
            hidden: if wide { WIDE_HIDDEN.to_vec() } else { BASE_HIDDEN.to_vec() },
            activation: ActivationKind::RealRelu,
            kind: NetworkKind::Real2Channel,
        }
    }

    /// Width of the first layer's input.
    pub fn input_dim(&self) -> usize {
        match self.kind {
            NetworkKind::Complex => self.input_len,
            NetworkKind::Real2Channel => 2 * self.input_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 {
            return Err(Error::InvalidConfig("input length must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "hidden widths must be non-empty and positive, got {:?}",
                self.hidden
            )));
        }
        let legal = match self.kind {
            NetworkKind::Complex => Complex::supports(self.activation),
            NetworkKind::Real2Channel => f64::supports(self.activation),
        };
        if !legal {
            return Err(Error::InvalidConfig(format!(
                "activation {} is not available for {:?} networks",
                self.activation, self.kind
            )));
        }
        Ok(())
    }
}

/// The six compared estimators, five of which are networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    NearestNeighbor,
    Real,
    Real2x,
    ComplexCardioid,
    ComplexSepSig,
    ComplexSiglog,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::NearestNeighbor,
        Method::Real,
        Method::Real2x,
        Method::ComplexCardioid,
        Method::ComplexSepSig,
        Method::ComplexSiglog,
    ];

    pub const NETWORKS: [Method; 5] = [
        Method::Real,
        Method::Real2x,
        Method::ComplexCardioid,
        Method::ComplexSepSig,
        Method::ComplexSiglog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::NearestNeighbor => "nearest-neighbor",
            Method::Real => "real",
            Method::Real2x => "real2x",
            Method::ComplexCardioid => "complex-cardioid",
            Method::ComplexSepSig => "complex-sepsig",
            Method::ComplexSiglog => "complex-siglog",
        }
    }

    /// Network architecture, or `None` for the dictionary baseline.
    pub fn network_config(self) -> Option<NetworkConfig> {
        match self {
            Method::NearestNeighbor => None,
            Method::Real => Some(NetworkConfig::real(false)),
            Method::Real2x => Some(NetworkConfig::real(true)),
            Method::ComplexCardioid => Some(NetworkConfig::complex(ActivationKind::Cardioid)),
            Method::ComplexSepSig => Some(NetworkConfig::complex(ActivationKind::SeparableSigmoid)),
            Method::ComplexSiglog => Some(NetworkConfig::complex(ActivationKind::Siglog)),
        }
    }

    /// The method whose architecture `cfg` has, ignoring input length.
    pub fn identify(cfg: &NetworkConfig) -> Option<Method> {
        Method::NETWORKS.into_iter().find(|m| {
            let want = m.network_config().expect("network method");
            (want.kind, want.activation, &want.hidden) == (cfg.kind, cfg.activation, &cfg.hidden)
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Scalars a network can be initialized over.
pub trait InitScalar: Activation {
    /// Zero-mean uniform draw for a layer with the given fan-in and fan-out.
    fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self;
}

impl InitScalar for f64 {
    /// Glorot uniform, variance `2/(fan_in + fan_out)`.
    fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> f64 {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        rng.random_range(-bound..bound)
    }
}

impl InitScalar for Complex {
    /// Real and imaginary parts each uniform with variance `1/(2(fan_in + fan_out))`.
    fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Complex {
        let bound = (1.5 / (fan_in + fan_out) as f64).sqrt();
        Complex::new(rng.random_range(-bound..bound), rng.random_range(-bound..bound))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenBlock<S> {
    pub dense: Dense<S>,
    pub norm: BatchNorm<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<S> {
    pub activation: ActivationKind,
    pub blocks: Vec<HiddenBlock<S>>,
    pub head: Dense<S>,
}

/// Per-parameter cogradients `∂L/∂w̄`, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S> {
    pub blocks: Vec<BlockGrads<S>>,
    pub head_weights: Matrix<S>,
    pub head_bias: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrads<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

/// Everything a training-mode forward pass caches for backward.
#[derive(Debug)]
pub struct NetworkTape<S> {
    blocks: Vec<BlockTape<S>>,
    head: DenseTape<S>,
}

#[derive(Debug)]
struct BlockTape<S> {
    dense: DenseTape<S>,
    norm: BatchNormTape<S>,
    dz: Matrix<S>,
    dzbar: Matrix<S>,
}

/// Builds the network described by `cfg` with seeded Glorot weights.
pub fn build_network<S: InitScalar>(cfg: &NetworkConfig, seed: u64) -> Result<Network<S>> {
    cfg.validate()?;
    let expected = if S::IS_COMPLEX { NetworkKind::Complex } else { NetworkKind::Real2Channel };
    if cfg.kind != expected {
        return Err(Error::InvalidConfig(format!(
            "{:?} configuration built over the wrong scalar type",
            cfg.kind
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |fan_in: usize, fan_out: usize| {
        let weights = Matrix::from_fn(fan_out, fan_in, |_, _| S::glorot(&mut rng, fan_in, fan_out));
        Dense::new(weights, vec![S::ZERO; fan_out])
    };
    let mut blocks = Vec::with_capacity(cfg.hidden.len());
    let mut width = cfg.input_dim();
    for &h in &cfg.hidden {
        blocks.push(HiddenBlock {
            dense: layer(width, h)?,
            norm: BatchNorm::new(h),
        });
        width = h;
    }
    let head = layer(width, 1)?;
    Ok(Network {
        activation: cfg.activation,
        blocks,
        head,
    })
}

impl<S: Activation> Network<S> {
    pub fn input_dim(&self) -> usize {
        self.blocks
            .first()
            .map(|b| b.dense.inputs())
            .unwrap_or_else(|| self.head.inputs())
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dense.outputs()).collect()
    }

    /// Learnable scalar count (complex entries count once).
    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|p| p.len()).sum()
    }

    /// Learnable parameters in canonical order: per block `W, b, γ, β`, then
    /// the head `W, b`.
    pub fn parameters(&self) -> impl Iterator<Item = &[S]> {
        self.blocks
            .iter()
            .flat_map(|b| {
                [
                    b.dense.weights.as_slice(),
                    b.dense.bias.as_slice(),
                    b.norm.gamma.as_slice(),
                    b.norm.beta.as_slice(),
                ]
            })
            .chain([self.head.weights.as_slice(), self.head.bias.as_slice()])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut [S]> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                [
                    b.dense.weights.as_mut_slice(),
                    b.dense.bias.as_mut_slice(),
                    b.norm.gamma.as_mut_slice(),
                    b.norm.beta.as_mut_slice(),
                ]
            })
            .chain([self.head.weights.as_mut_slice(), self.head.bias.as_mut_slice()])
    }

    fn activate(&self, x: &mut Matrix<S>) {
        for v in x.as_mut_slice() {
            *v = S::activate(self.activation, *v).0;
        }
    }

    /// Inference forward pass using running batch-norm statistics.
    /// Returns one output per input row.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Vec<S>> {
        let mut h = x.clone();
        for block in &self.blocks {
            let u = block.dense.forward(&h)?;
            h = block.norm.forward_running(&u)?;
            self.activate(&mut h);
        }
        Ok(self.head.forward(&h)?.into_vec())
    }

    /// Training-mode forward pass with batch statistics; updates the running
    /// statistics and returns the tape for [`Network::backward`].
    pub fn forward_train(&mut self, x: &Matrix<S>) -> Result<(Vec<S>, NetworkTape<S>)> {
        let activation = self.activation;
        let mut tapes = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for block in &mut self.blocks {
            let mut dense_tape = DenseTape::default();
            let mut norm_tape = BatchNormTape::default();
            let u = block.dense.forward_taped(&h, &mut dense_tape)?;
            let mut a = block.norm.forward(&u, StatsMode::Batch, Some(&mut norm_tape))?;
            let (rows, cols) = a.shape();
            let mut dz = Matrix::zeros(rows, cols);
            let mut dzbar = Matrix::zeros(rows, cols);
            for ((v, d), dbar) in a
                .as_mut_slice()
                .iter_mut()
                .zip(dz.as_mut_slice())
                .zip(dzbar.as_mut_slice())
            {
                let (y, p, q) = S::activate(activation, *v);
                *v = y;
                *d = p;
                *dbar = q;
            }
            tapes.push(BlockTape {
                dense: dense_tape,
                norm: norm_tape,
                dz,
                dzbar,
            });
            h = a;
        }
        let mut head = DenseTape::default();
        let out = self.head.forward_taped(&h, &mut head)?.into_vec();
        Ok((out, NetworkTape { blocks: tapes, head }))
    }

    /// Backpropagates output cogradients `∂L/∂ō` (one per batch row).
    pub fn backward(&self, tape: &NetworkTape<S>, upstream: &[S]) -> Result<Gradients<S>> {
        if tape.blocks.len() != self.blocks.len() {
            return Err(Error::TapeNotPopulated);
        }
        let g = Matrix::new(upstream.len(), 1, upstream.to_vec())?;
        let head = self.head.backward(&tape.head, &g, !self.blocks.is_empty())?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut g = head.input;
        for (idx, (block, bt)) in self.blocks.iter().zip(&tape.blocks).enumerate().rev() {
            let mut ga = g.take().ok_or(Error::TapeNotPopulated)?;
            for ((v, d), dbar) in ga
                .as_mut_slice()
                .iter_mut()
                .zip(bt.dz.as_slice())
                .zip(bt.dzbar.as_slice())
            {
                *v = chain(*v, *d, *dbar);
            }
            let norm = block.norm.backward(&bt.norm, &ga)?;
            let dense = block.dense.backward(&bt.dense, &norm.input, idx > 0)?;
            g = dense.input;
            blocks.push(BlockGrads {
                weights: dense.weights,
                bias: dense.bias,
                gamma: norm.gamma,
                beta: norm.beta,
            });
        }
        blocks.reverse();
        Ok(Gradients {
            blocks,
            head_weights: head.weights,
            head_bias: head.bias,
        })
    }

    /// Mean of `|out − label|²` over the batch and its cogradients.
    pub fn loss_and_gradients(&mut self, x: &Matrix<S>, labels: &[f64]) -> Result<(f64, Gradients<S>)> {
        if labels.len() != x.rows() {
            return Err(Error::mismatch("loss_and_gradients labels", x.rows(), labels.len()));
        }
        let (out, tape) = self.forward_train(x)?;
        let inv_n = 1.0 / labels.len() as f64;
        let mut total = 0.0;
        let upstream: Vec<S> = out
            .iter()
            .zip(labels)
            .map(|(&o, &t)| {
                let (l, g) = loss_mse(o, t);
                total += l;
                g.scale(inv_n)
            })
            .collect();
        let grads = self.backward(&tape, &upstream)?;
        Ok((total * inv_n, grads))
    }
}

impl<S: Scalar> Gradients<S> {
    /// Cogradients in the same order as [`Network::parameters`].
    pub fn slices(&self) -> impl Iterator<Item = &[S]> {
        self.blocks
            .iter()
            .flat_map(|b| {
                [
                    b.weights.as_slice(),
                    b.bias.as_slice(),
                    b.gamma.as_slice(),
                    b.beta.as_slice(),
                ]
            })
            .chain([self.head_weights.as_slice(), self.head_bias.as_slice()])
    }
}

/// `w ← w − α·∂L/∂w̄` for every learnable parameter.
pub fn sgd_step<S: Activation>(net: &mut Network<S>, grads: &Gradients<S>, learning_rate: f64) -> Result<()> {
    let shapes: Vec<usize> = net.parameters().map(|p| p.len()).collect();
    let grad_shapes: Vec<usize> = grads.slices().map(|g| g.len()).collect();
    if shapes != grad_shapes {
        let total = |v: &[usize]| v.iter().sum::<usize>();
        return Err(Error::mismatch("sgd_step", total(&shapes), total(&grad_shapes)));
    }
    for (param, grad) in net.parameters_mut().zip(grads.slices()) {
        for (w, g) in param.iter_mut().zip(grad) {
            *w -= g.scale(learning_rate);
        }
    }
    Ok(())
}
