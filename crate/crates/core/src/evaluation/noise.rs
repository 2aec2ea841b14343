//! Circular complex Gaussian noise at a target peak SNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::complex::{CVector, Complex};

/// Noise standard deviation for `signal` at `psnr` dB, where
/// `psnr = 20·log10(max_t |s_t| / σ)`. Infinite pSNR gives zero.
pub fn noise_sigma(signal: &[Complex], psnr: f64) -> f64 {
    if psnr == f64::INFINITY {
        return 0.0;
    }
    let peak = signal.iter().map(|z| z.magnitude()).fold(0.0, f64::max);
    peak / 10f64.powf(psnr / 20.0)
}

/// Adds noise with `E|n|² = σ²`, i.e. `σ/√2` per component.
pub fn add_noise(signal: &[Complex], psnr: f64, seed: u64) -> CVector {
    add_noise_stream(signal, psnr, seed, 0)
}

/// As [`add_noise`], drawing from an independent stream of the seeded
/// generator so that many signals can share one seed.
pub fn add_noise_stream(signal: &[Complex], psnr: f64, seed: u64, stream: u64) -> CVector {
    let sigma = noise_sigma(signal, psnr);
    if sigma == 0.0 {
        return signal.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("finite sigma");
    signal
        .iter()
        .map(|z| *z + Complex::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect()
}
