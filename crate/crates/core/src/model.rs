//! A trained per-label regressor and its `CMRF` model file.
//!
//! Layout (little-endian):
//!
//! ```text
//! "CMRF" | version u32 | network_kind u8 | activation u8 | label u8
//! input_len u32 | hidden_count u32 | hidden widths u32… | bn_eps f64 | bn_momentum f64
//! per hidden block: W (re,im)… | b | γ | β | running mean | running var (v, 0)
//! head: W | b
//! label mean f64 | label std f64
//! ```
//!
//! Real networks store their weights as `(w, 0.0)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::activations::{Activation, ActivationKind};
use crate::autodiff::{BatchNorm, Dense};
use crate::binio::{Reader, Writer};
use crate::complex::{l2_norm, Complex};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar};
use crate::network::{build_network, HiddenBlock, Network, NetworkConfig, NetworkKind};
use crate::params::Label;

pub const MODEL_MAGIC: &[u8; 4] = b"CMRF";
pub const MODEL_VERSION: u32 = 1;

/// Z-score transform of a label: `standardized = (raw − mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, std: 1.0 };

    /// Population statistics of `values`; a zero spread falls back to 1.
    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Standardization {
            mean,
            std: if std > 0.0 && std.is_finite() { std } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.std
    }

    #[inline]
    pub fn invert(&self, standardized: f64) -> f64 {
        standardized * self.std + self.mean
    }
}

/// Maps a unit-normalized complex signal onto a network input row.
pub trait InputEncoding: Activation {
    fn encode(signal: &[Complex], scale: f64, out: &mut Vec<Self>);
}

impl InputEncoding for Complex {
    fn encode(signal: &[Complex], scale: f64, out: &mut Vec<Complex>) {
        out.extend(signal.iter().map(|z| z.scale(scale)));
    }
}

impl InputEncoding for f64 {
    /// Channels are concatenated: `[re…, im…]`.
    fn encode(signal: &[Complex], scale: f64, out: &mut Vec<f64>) {
        out.extend(signal.iter().map(|z| z.re * scale));
        out.extend(signal.iter().map(|z| z.im * scale));
    }
}

/// Encodes the given rows, each divided by its own L2 norm.
pub fn encode_batch<S: InputEncoding>(rows: &[&[Complex]]) -> Result<Matrix<S>> {
    let width = rows.first().map(|r| r.len()).ok_or(Error::InvalidParameter("empty batch".into()))?;
    let per_row = if S::IS_COMPLEX { width } else { 2 * width };
    let mut data = Vec::with_capacity(rows.len() * per_row);
    for row in rows {
        if row.len() != width {
            return Err(Error::mismatch("encode_batch", width, row.len()));
        }
        let norm = l2_norm(row);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroSignal);
        }
        S::encode(row, 1.0 / norm, &mut data);
    }
    Matrix::new(rows.len(), per_row, data)
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyNetwork {
    Complex(Network<Complex>),
    Real(Network<f64>),
}

impl AnyNetwork {
    pub fn build(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        Ok(match cfg.kind {
            NetworkKind::Complex => AnyNetwork::Complex(build_network(cfg, seed)?),
            NetworkKind::Real2Channel => AnyNetwork::Real(build_network(cfg, seed)?),
        })
    }

    pub fn kind(&self) -> NetworkKind {
        match self {
            AnyNetwork::Complex(_) => NetworkKind::Complex,
            AnyNetwork::Real(_) => NetworkKind::Real2Channel,
        }
    }

    pub fn activation(&self) -> ActivationKind {
        match self {
            AnyNetwork::Complex(n) => n.activation,
            AnyNetwork::Real(n) => n.activation,
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        match self {
            AnyNetwork::Complex(n) => n.hidden_widths(),
            AnyNetwork::Real(n) => n.hidden_widths(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            AnyNetwork::Complex(n) => n.parameter_count(),
            AnyNetwork::Real(n) => n.parameter_count(),
        }
    }
}

/// One network regressing one label, with its label scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionModel {
    pub label: Label,
    pub input_len: usize,
    pub network: AnyNetwork,
    pub standardization: Standardization,
}

impl RegressionModel {
    pub fn new(cfg: &NetworkConfig, label: Label, seed: u64) -> Result<Self> {
        Ok(RegressionModel {
            label,
            input_len: cfg.input_len,
            network: AnyNetwork::build(cfg, seed)?,
            standardization: Standardization::IDENTITY,
        })
    }

    pub fn config(&self) -> NetworkConfig {
        NetworkConfig {
            input_len: self.input_len,
            hidden: self.network.hidden_widths(),
            activation: self.network.activation(),
            kind: self.network.kind(),
        }
    }

    pub fn predict(&self, signal: &[Complex]) -> Result<f64> {
        Ok(self.predict_batch(&[signal])?[0])
    }

    /// De-standardized predictions, one per signal, in input order.
    /// Complex networks report the real part of their scalar output.
    pub fn predict_batch(&self, signals: &[&[Complex]]) -> Result<Vec<f64>> {
        if signals.is_empty() {
            return Ok(Vec::new());
        }
        for s in signals {
            if s.len() != self.input_len {
                return Err(Error::mismatch("predict", self.input_len, s.len()));
            }
        }
        let raw: Vec<f64> = match &self.network {
            AnyNetwork::Complex(n) => forward_rows(n, signals)?,
            AnyNetwork::Real(n) => forward_rows(n, signals)?,
        };
        Ok(raw.into_iter().map(|v| self.standardization.invert(v)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer::new(out);
        w.bytes(MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        w.u8(self.network.kind().code())?;
        w.u8(self.network.activation().code())?;
        w.u8(self.label.code())?;
        w.len(self.input_len)?;
        match &self.network {
            AnyNetwork::Complex(n) => write_network(&mut w, n)?,
            AnyNetwork::Real(n) => write_network(&mut w, n)?,
        }
        w.f64(self.standardization.mean)?;
        w.f64(self.standardization.std)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.magic(MODEL_MAGIC)?;
        r.version(MODEL_VERSION)?;
        let kind = NetworkKind::from_code(r.u8()?).ok_or_else(|| Error::Format("unknown network kind".into()))?;
        let activation =
            ActivationKind::from_code(r.u8()?).ok_or_else(|| Error::Format("unknown activation".into()))?;
        let label = Label::from_code(r.u8()?).ok_or_else(|| Error::Format("unknown label".into()))?;
        let input_len = r.count("input length")?;
        let hidden_count = r.count("hidden layer")?;
        if hidden_count > 64 {
            return Err(Error::Format(format!("{hidden_count} hidden layers is implausible")));
        }
        let mut hidden = Vec::with_capacity(hidden_count);
        for _ in 0..hidden_count {
            hidden.push(r.count("layer width")?);
        }
        let cfg = NetworkConfig {
            input_len,
            hidden,
            activation,
            kind,
        };
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        let network = match kind {
            NetworkKind::Complex => AnyNetwork::Complex(read_network(&mut r, &cfg)?),
            NetworkKind::Real2Channel => AnyNetwork::Real(read_network(&mut r, &cfg)?),
        };
        let standardization = Standardization {
            mean: r.f64()?,
            std: r.f64()?,
        };
        r.finish()?;
        Ok(RegressionModel {
            label,
            input_len,
            network,
            standardization,
        })
    }
}

fn forward_rows<S: InputEncoding>(net: &Network<S>, signals: &[&[Complex]]) -> Result<Vec<f64>> {
    // Bounded chunks keep the batch matrices small for whole-image calls.
    const CHUNK: usize = 1024;
    let mut out = Vec::with_capacity(signals.len());
    for chunk in signals.chunks(CHUNK) {
        let x = encode_batch::<S>(chunk)?;
        out.extend(net.forward(&x)?.into_iter().map(|v| v.real()));
    }
    Ok(out)
}

/// Scalars storable as `(re, im)` pairs.
trait PairCodec: Scalar {
    fn to_pair(self) -> Complex;
    fn from_pair(z: Complex) -> Result<Self>;
}

impl PairCodec for Complex {
    fn to_pair(self) -> Complex {
        self
    }
    fn from_pair(z: Complex) -> Result<Complex> {
        Ok(z)
    }
}

impl PairCodec for f64 {
    fn to_pair(self) -> Complex {
        Complex::new(self, 0.0)
    }
    fn from_pair(z: Complex) -> Result<f64> {
        if z.im != 0.0 {
            return Err(Error::Format("real network weight has an imaginary part".into()));
        }
        Ok(z.re)
    }
}

fn write_values<W: Write, S: PairCodec>(w: &mut Writer<W>, v: &[S]) -> Result<()> {
    v.iter().try_for_each(|x| {
        let z = x.to_pair();
        w.f64(z.re)?;
        w.f64(z.im)
    })
}

fn read_values<R: Read, S: PairCodec>(r: &mut Reader<R>, n: usize) -> Result<Vec<S>> {
    r.complex(n)?.into_iter().map(S::from_pair).collect()
}

fn write_network<W: Write, S: PairCodec>(w: &mut Writer<W>, net: &Network<S>) -> Result<()> {
    w.len(net.blocks.len())?;
    for b in &net.blocks {
        w.len(b.dense.outputs())?;
    }
    let (eps, momentum) = net
        .blocks
        .first()
        .map(|b| (b.norm.eps, b.norm.momentum))
        .unwrap_or((crate::autodiff::BN_EPSILON, crate::autodiff::BN_MOMENTUM));
    w.f64(eps)?;
    w.f64(momentum)?;
    for b in &net.blocks {
        write_values(w, b.dense.weights.as_slice())?;
        write_values(w, &b.dense.bias)?;
        write_values(w, &b.norm.gamma)?;
        write_values(w, &b.norm.beta)?;
        write_values(w, &b.norm.running_mean)?;
        write_values(w, &b.norm.running_var)?;
    }
    write_values(w, net.head.weights.as_slice())?;
    write_values(w, &net.head.bias)
}

fn read_network<R: Read, S: PairCodec>(r: &mut Reader<R>, cfg: &NetworkConfig) -> Result<Network<S>> {
    let eps = r.f64()?;
    let momentum = r.f64()?;
    let mut blocks = Vec::with_capacity(cfg.hidden.len());
    let mut width = cfg.input_dim();
    for &h in &cfg.hidden {
        let weights = Matrix::new(h, width, read_values(r, h * width)?)?;
        let bias = read_values(r, h)?;
        let mut norm = BatchNorm::new(h);
        norm.gamma = read_values(r, h)?;
        norm.beta = read_values(r, h)?;
        norm.running_mean = read_values(r, h)?;
        norm.running_var = read_values::<R, f64>(r, h)?;
        norm.eps = eps;
        norm.momentum = momentum;
        blocks.push(HiddenBlock {
            dense: Dense::new(weights, bias)?,
            norm,
        });
        width = h;
    }
    let head = Dense::new(Matrix::new(1, width, read_values(r, width)?)?, read_values(r, 1)?)?;
    Ok(Network {
        activation: cfg.activation,
        blocks,
        head,
    })
}
