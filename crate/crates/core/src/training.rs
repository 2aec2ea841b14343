//! Mini-batch complex SGD over a labeled signal set.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{encode_batch, AnyNetwork, InputEncoding, RegressionModel, Standardization};
use crate::network::{sgd_step, Network};
use crate::params::Label;

/// Signals (one per row) paired with one label each. The signal matrix is
/// shared so that the T1, T2 and B0 sets of one sample draw cost one copy.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub label: Label,
    pub signals: Arc<CMatrix>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(label: Label, signals: impl Into<Arc<CMatrix>>, labels: Vec<f64>) -> Result<Self> {
        let signals = signals.into();
        if signals.rows() != labels.len() {
            return Err(Error::mismatch("LabeledDataset", signals.rows(), labels.len()));
        }
        Ok(LabeledDataset { label, signals, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.signals.cols()
    }

    pub fn signal(&self, i: usize) -> &[Complex] {
        self.signals.row(i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fitted on the training labels when `None`.
    pub standardization: Option<Standardization>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 256,
            epochs: 50,
            seed: 0,
            standardization: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Trains `model` and returns it with the per-epoch mean training loss.
pub fn train(model: RegressionModel, data: &LabeledDataset, cfg: &TrainConfig) -> Result<(RegressionModel, Vec<f64>)> {
    train_with_progress(model, data, cfg, |_, _| {})
}

/// As [`train`], calling `progress(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    mut model: RegressionModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<(RegressionModel, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if data.label != model.label {
        return Err(Error::InvalidConfig(format!(
            "dataset holds {} labels but the model regresses {}",
            data.label, model.label
        )));
    }
    if data.signal_len() != model.input_len {
        return Err(Error::mismatch("train", model.input_len, data.signal_len()));
    }
    if cfg.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    if data.len() < 2 {
        return Err(Error::BatchTooSmall(data.len()));
    }

    let scaling = cfg.standardization.unwrap_or_else(|| Standardization::fit(&data.labels));
    model.standardization = scaling;
    let targets: Vec<f64> = data.labels.iter().map(|&v| scaling.apply(v)).collect();

    let history = match &mut model.network {
        AnyNetwork::Complex(n) => run_epochs(n, data, &targets, cfg, &mut progress)?,
        AnyNetwork::Real(n) => run_epochs(n, data, &targets, cfg, &mut progress)?,
    };
    Ok((model, history))
}

fn run_epochs<S: InputEncoding>(
    net: &mut Network<S>,
    data: &LabeledDataset,
    targets: &[f64],
    cfg: &TrainConfig,
    progress: &mut impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut rows: Vec<&[Complex]> = Vec::with_capacity(cfg.batch_size);
    let mut labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            // A trailing single sample cannot be batch-normalized.
            if batch.len() < 2 {
                continue;
            }
            rows.clear();
            labels.clear();
            rows.extend(batch.iter().map(|&i| data.signal(i)));
            labels.extend(batch.iter().map(|&i| targets[i]));
            let x = encode_batch::<S>(&rows)?;
            let (loss, grads) = net.loss_and_gradients(&x, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            sgd_step(net, &grads, cfg.learning_rate)?;
            total += loss * batch.len() as f64;
            seen += batch.len();
        }
        let mean = total / seen as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        progress(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}
