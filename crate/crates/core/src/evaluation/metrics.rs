//! Normalized root-mean-square error over a mask.

use crate::error::{Error, Result};
use crate::params::Label;

/// `100 · sqrt(mean (pred − truth)²) / mean truth` over masked pixels.
pub fn nrmse(predicted: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    nrmse_with(predicted, truth, mask, |t| t)
}

/// As [`nrmse`] but normalized by `mean |truth|`, for maps such as B0 whose
/// mean is near zero.
pub fn nrmse_abs(predicted: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    nrmse_with(predicted, truth, mask, f64::abs)
}

/// The convention used for each parameter in reports.
pub fn label_nrmse(label: Label, predicted: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    match label {
        Label::B0 => nrmse_abs(predicted, truth, mask),
        Label::T1 | Label::T2 => nrmse(predicted, truth, mask),
    }
}

fn nrmse_with(predicted: &[f64], truth: &[f64], mask: &[bool], scale: impl Fn(f64) -> f64) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::mismatch("nrmse", truth.len(), predicted.len()));
    }
    if mask.len() != truth.len() {
        return Err(Error::mismatch("nrmse mask", truth.len(), mask.len()));
    }
    let mut n = 0usize;
    let mut sq = 0.0;
    let mut total = 0.0;
    for ((&p, &t), &m) in predicted.iter().zip(truth).zip(mask) {
        if m {
            n += 1;
            sq += (p - t) * (p - t);
            total += scale(t);
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mean = total / n as f64;
    if mean == 0.0 {
        return Err(Error::ZeroMeanTruth);
    }
    Ok(100.0 * (sq / n as f64).sqrt() / mean.abs())
}
