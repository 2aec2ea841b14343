//! Simulated training sets and their `MRFT` file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MRFT"  u32 version
//! u8 inversion, u32 N, N × (flip, phase, TR, TE: f64)
//! u64 n
//! n × (t1, t2, b0: f64, N × (re, im: f64))   signals unit-normalized
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{Reader, Writer};
use crate::bloch::PulseSequence;
use crate::complex::Complex;
use crate::dictionary::simulate_normalized;
use crate::error::{Error, Result};
use crate::grid::ParamGrid;
use crate::linalg::CMatrix;
use crate::params::{Label, TissueParams};
use crate::training::LabeledDataset;

const MAGIC: &[u8; 4] = b"MRFT";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// `n` lattice points drawn uniformly with replacement.
    Uniform { n: usize, seed: u64 },
    /// Every feasible lattice point once, in dictionary order.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub sequence: PulseSequence,
    pub params: Vec<TissueParams>,
    /// Unit-norm signals, one row per entry of `params`.
    pub signals: Arc<CMatrix>,
}

/// `n` feasible lattice points drawn uniformly, so every (T1, T2, B0)
/// combination is as likely as it is frequent in the dictionary.
pub fn sample_lattice(grid: &ParamGrid, n: usize, seed: u64) -> Result<Vec<TissueParams>> {
    grid.validate()?;
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| points[rng.random_range(0..points.len())]).collect())
}

/// Simulates a training set and splits it into label-aligned T1, T2 and B0
/// datasets sharing one signal matrix.
pub fn sample_training_set(
    grid: &ParamGrid,
    n: usize,
    seq: &PulseSequence,
    seed: u64,
) -> Result<[LabeledDataset; 3]> {
    TrainingSet::generate(grid, seq, Sampling::Uniform { n, seed })?.datasets()
}

impl TrainingSet {
    pub fn generate(grid: &ParamGrid, seq: &PulseSequence, sampling: Sampling) -> Result<Self> {
        seq.validate()?;
        let params = match sampling {
            Sampling::Uniform { n, seed } => {
                if n == 0 {
                    return Err(Error::InvalidParameter("training set size must be at least 1".into()));
                }
                sample_lattice(grid, n, seed)?
            }
            Sampling::Exhaustive => {
                grid.validate()?;
                let pts = grid.points();
                if pts.is_empty() {
                    return Err(Error::EmptyGrid);
                }
                pts
            }
        };
        let (signals, _) = simulate_normalized(&params, seq)?;
        Ok(TrainingSet {
            sequence: seq.clone(),
            params,
            signals: Arc::new(signals),
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn dataset(&self, label: Label) -> Result<LabeledDataset> {
        let labels = self.params.iter().map(|p| p.get(label)).collect();
        LabeledDataset::new(label, Arc::clone(&self.signals), labels)
    }

    /// T1, T2 and B0 datasets, in that order.
    pub fn datasets(&self) -> Result<[LabeledDataset; 3]> {
        Ok([
            self.dataset(Label::T1)?,
            self.dataset(Label::T2)?,
            self.dataset(Label::B0)?,
        ])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer::new(out);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        self.sequence.write(&mut w)?;
        w.u64(self.len() as u64)?;
        for (k, p) in self.params.iter().enumerate() {
            w.f64s(&[p.t1, p.t2, p.b0])?;
            w.complex(self.signals.row(k))?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let sequence = PulseSequence::read(&mut r)?;
        let n = r.u64()? as usize;
        if n == 0 {
            return Err(Error::Format("training set is empty".into()));
        }
        let t = sequence.len();
        if n.saturating_mul(t) > crate::binio::MAX_ELEMENTS {
            return Err(Error::Format(format!("training set count {n} is implausible")));
        }
        let mut params = Vec::with_capacity(n);
        let mut data: Vec<Complex> = Vec::with_capacity(n * t);
        for k in 0..n {
            let h = r.f64s(3)?;
            let p = TissueParams::new(h[0], h[1], h[2], 1.0);
            p.validate().map_err(|e| Error::Format(format!("point {k}: {e}")))?;
            params.push(p);
            data.extend(r.complex(t)?);
        }
        r.finish()?;
        Ok(TrainingSet {
            sequence,
            params,
            signals: Arc::new(CMatrix::new(n, t, data)?),
        })
    }
}
