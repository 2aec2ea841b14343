//! Discrete Bloch simulation of fingerprint signals.
//!
//! Each repetition applies an instantaneous RF rotation, then free precession
//! with relaxation up to the echo time (where the signal is sampled), then the
//! remainder of the repetition time. Magnetization is in units of the
//! equilibrium value; the emitted sample is scaled by proton density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::io::{Read, Write};

use crate::binio::{Reader, Writer};
use crate::complex::{CVector, Complex};
use crate::error::{Error, Result};
use crate::network::SIGNAL_LEN;
use crate::params::TissueParams;

/// One repetition. Angles in radians, times in ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub flip_angle: f64,
    /// RF phase; a pulse of phase `φ` tips equilibrium magnetization toward
    /// `(cos φ, sin φ, 0)`.
    pub phase: f64,
    pub tr: f64,
    pub te: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub inversion: bool,
    pub pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn new(inversion: bool, pulses: Vec<Pulse>) -> Result<Self> {
        let seq = PulseSequence { inversion, pulses };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub(crate) fn write<W: Write>(&self, w: &mut Writer<W>) -> Result<()> {
        w.u8(u8::from(self.inversion))?;
        w.len(self.pulses.len())?;
        for p in &self.pulses {
            w.f64s(&[p.flip_angle, p.phase, p.tr, p.te])?;
        }
        Ok(())
    }

    pub(crate) fn read<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        let inversion = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("bad inversion flag {b}"))),
        };
        let n = r.count("pulse")?;
        let mut pulses = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let v = r.f64s(4)?;
            pulses.push(Pulse {
                flip_angle: v[0],
                phase: v[1],
                tr: v[2],
                te: v[3],
            });
        }
        PulseSequence::new(inversion, pulses).map_err(|e| Error::Format(format!("stored sequence: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses.is_empty() {
            return Err(Error::InvalidParameter("pulse sequence is empty".into()));
        }
        for (k, p) in self.pulses.iter().enumerate() {
            if !(p.te > 0.0 && p.tr > p.te && p.tr.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "repetition {k}: need TR > TE > 0, got TR={} TE={}",
                    p.tr, p.te
                )));
            }
            if !(0.0..=std::f64::consts::PI).contains(&p.flip_angle) {
                return Err(Error::InvalidParameter(format!(
                    "repetition {k}: flip angle {} outside [0, π]",
                    p.flip_angle
                )));
            }
            if !p.phase.is_finite() {
                return Err(Error::InvalidParameter(format!("repetition {k}: non-finite RF phase")));
            }
        }
        Ok(())
    }
}

/// Deterministic 500-repetition schedule: an inversion pulse, flip angles in
/// five sinusoidal lobes spanning 10°–70° with ±2° seeded jitter (clamped to
/// [0°, 90°]), TR drawn uniformly from 11–14 ms, TE = TR/2, zero RF phase.
pub fn default_sequence(seed: u64) -> PulseSequence {
    const LOBE: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pulses = (0..SIGNAL_LEN)
        .map(|k| {
            let pos = (k % LOBE) as f64 / LOBE as f64;
            let base = 10.0 + 60.0 * (std::f64::consts::PI * pos).sin();
            let deg = (base + rng.random_range(-2.0..2.0)).clamp(0.0, 90.0);
            let tr = rng.random_range(11.0..14.0);
            Pulse {
                flip_angle: deg.to_radians(),
                phase: 0.0,
                tr,
                te: tr / 2.0,
            }
        })
        .collect();
    PulseSequence {
        inversion: true,
        pulses,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Magnetization {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Magnetization {
    pub const EQUILIBRIUM: Magnetization = Magnetization { x: 0.0, y: 0.0, z: 1.0 };

    pub fn transverse(&self) -> Complex {
        Complex::new(self.x, self.y)
    }

    /// Rotation by `angle` about the in-plane axis `(−sin φ, cos φ, 0)`.
    fn rf(self, angle: f64, phase: f64) -> Self {
        let (sa, ca) = angle.sin_cos();
        let (sp, cp) = phase.sin_cos();
        let (nx, ny) = (-sp, cp);
        let dot = nx * self.x + ny * self.y;
        // n × v with n_z = 0.
        let cross = (ny * self.z, -nx * self.z, nx * self.y - ny * self.x);
        Magnetization {
            x: self.x * ca + cross.0 * sa + nx * dot * (1.0 - ca),
            y: self.y * ca + cross.1 * sa + ny * dot * (1.0 - ca),
            z: self.z * ca + cross.2 * sa,
        }
    }

    /// Precession by `2π·b0·t` and relaxation over `t` ms.
    fn evolve(self, t: f64, tissue: &TissueParams) -> Self {
        let e2 = (-t / tissue.t2).exp();
        let e1 = (-t / tissue.t1).exp();
        let rot = Complex::cis(2.0 * std::f64::consts::PI * tissue.b0 * t * 1e-3);
        let m = self.transverse() * rot;
        Magnetization {
            x: m.re * e2,
            y: m.im * e2,
            z: 1.0 + (self.z - 1.0) * e1,
        }
    }
}

/// Fingerprint of `tissue` under `seq`: one sample `pd·(Mx + iMy)` per
/// repetition, taken at TE.
pub fn simulate_signal(tissue: &TissueParams, seq: &PulseSequence) -> Result<CVector> {
    let mut out = Vec::with_capacity(seq.len());
    simulate_into(tissue, seq, |m, _| out.push(m.transverse().scale(tissue.pd)))?;
    Ok(out)
}

/// Magnetization at every echo and at the end of every repetition
/// (unscaled by proton density), interleaved.
pub fn simulate_trace(tissue: &TissueParams, seq: &PulseSequence) -> Result<Vec<Magnetization>> {
    let mut out = Vec::with_capacity(2 * seq.len());
    simulate_into(tissue, seq, |echo, end| {
        out.push(echo);
        out.push(end);
    })?;
    Ok(out)
}

fn simulate_into(
    tissue: &TissueParams,
    seq: &PulseSequence,
    mut emit: impl FnMut(Magnetization, Magnetization),
) -> Result<()> {
    tissue.validate()?;
    seq.validate()?;
    let mut m = Magnetization::EQUILIBRIUM;
    if seq.inversion {
        m.z = -m.z;
    }
    for p in &seq.pulses {
        m = m.rf(p.flip_angle, p.phase);
        let echo = m.evolve(p.te, tissue);
        m = echo.evolve(p.tr - p.te, tissue);
        emit(echo, m);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{inner_product, l2_norm};

    #[test]
    fn zero_proton_density_is_silent() {
        let seq = default_sequence(1);
        let s = simulate_signal(&TissueParams::new(800.0, 80.0, 10.0, 0.0), &seq).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().all(|z| z.magnitude() == 0.0));
    }

    #[test]
    fn on_resonance_signal_is_real() {
        let seq = default_sequence(2);
        let s = simulate_signal(&TissueParams::new(1200.0, 100.0, 0.0, 1.0), &seq).unwrap();
        assert!(s.iter().all(|z| z.im.abs() < 1e-15), "max |im| too large");
        assert!(l2_norm(&s) > 0.1);
    }

    #[test]
    fn csf_and_white_matter_are_distinguishable() {
        let seq = default_sequence(3);
        let csf = simulate_signal(&TissueParams::new(4000.0, 600.0, 0.0, 1.0), &seq).unwrap();
        let wm = simulate_signal(&TissueParams::new(500.0, 70.0, 0.0, 1.0), &seq).unwrap();
        let score = inner_product(&csf, &wm).unwrap().magnitude() / (l2_norm(&csf) * l2_norm(&wm));
        assert!(score < 0.99, "normalized overlap {score}");
    }

    #[test]
    fn default_sequence_properties() {
        let a = default_sequence(7);
        assert_eq!(a, default_sequence(7));
        assert_ne!(a, default_sequence(8));
        assert_eq!(a.len(), 500);
        assert!(a.inversion);
        let mut angles: Vec<u64> = a.pulses.iter().map(|p| p.flip_angle.to_bits()).collect();
        for p in &a.pulses {
            assert!((0.0..=90f64.to_radians()).contains(&p.flip_angle));
            assert!((11.0..14.0).contains(&p.tr));
            assert_eq!(p.te, p.tr / 2.0);
        }
        angles.sort_unstable();
        angles.dedup();
        assert!(angles.len() >= 100);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_invalid_inputs() {
        let seq = default_sequence(1);
        assert!(simulate_signal(&TissueParams::new(80.0, 800.0, 0.0, 1.0), &seq).is_err());
        let bad = PulseSequence {
            inversion: false,
            pulses: vec![Pulse {
                flip_angle: 0.3,
                phase: 0.0,
                tr: 5.0,
                te: 6.0,
            }],
        };
        assert!(bad.validate().is_err());
        assert!(PulseSequence::new(false, vec![]).is_err());
    }

    #[test]
    fn rf_phase_sets_tip_direction() {
        let m = Magnetization::EQUILIBRIUM.rf(std::f64::consts::FRAC_PI_2, 0.0);
        assert!((m.x - 1.0).abs() < 1e-15 && m.y.abs() < 1e-15 && m.z.abs() < 1e-15);
        let m = Magnetization::EQUILIBRIUM.rf(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        assert!(m.x.abs() < 1e-15 && (m.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_pulse_closed_form() {
        // 90° pulse then relaxation/precession to TE: m = e^{-TE/T2}·e^{iθ}.
        let seq = PulseSequence::new(
            false,
            vec![Pulse {
                flip_angle: std::f64::consts::FRAC_PI_2,
                phase: 0.0,
                tr: 10.0,
                te: 4.0,
            }],
        )
        .unwrap();
        let t = TissueParams::new(900.0, 60.0, 25.0, 2.0);
        let s = simulate_signal(&t, &seq).unwrap()[0];
        let expect = Complex::from_polar(2.0 * (-4.0f64 / 60.0).exp(), 2.0 * std::f64::consts::PI * 25.0 * 4e-3);
        assert!((s - expect).magnitude() < 1e-14);
    }

    fn random_tissue(rng: &mut ChaCha8Rng) -> TissueParams {
        let t1: f64 = rng.random_range(100.0..5000.0);
        let t2 = rng.random_range(10.0..t1.min(800.0));
        TissueParams::new(t1, t2, rng.random_range(-60.0..60.0), 1.0)
    }

    #[test]
    fn magnetization_stays_physical() {
        let seq = default_sequence(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let t = random_tissue(&mut rng);
            for m in simulate_trace(&t, &seq).unwrap() {
                assert!(m.transverse().magnitude() <= 1.0 + 1e-12, "{t:?}");
                assert!(m.z.abs() <= 1.0 + 1e-12, "{t:?}");
            }
        }
    }

    #[test]
    fn opposite_off_resonance_conjugates_signal() {
        let seq = default_sequence(5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let t = random_tissue(&mut rng);
            let up = simulate_signal(&t, &seq).unwrap();
            let down = simulate_signal(&TissueParams { b0: -t.b0, ..t }, &seq).unwrap();
            for (a, b) in up.iter().zip(&down) {
                assert!((a.conj() - *b).magnitude() < 1e-9);
            }
        }
    }
}
