//! Simulated fingerprint dictionary and its `MRFD` file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MRFD"  u32 version
//! u8 inversion, u32 N, N × (flip, phase, TR, TE: f64)
//! 3 × (u32 count, count × f64)           grid axes T1, T2, B0
//! u64 D
//! D × (t1, t2, b0, raw_norm: f64, N × (re, im: f64))
//! ```
//!
//! `raw_norm` is the L2 norm of the simulated signal before normalization,
//! kept so proton density can be recovered from a matched test signal.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::binio::{Reader, Writer};
use crate::bloch::{simulate_signal, PulseSequence};
use crate::complex::{l2_norm, Complex};
use crate::error::{Error, Result};
use crate::grid::ParamGrid;
use crate::linalg::CMatrix;
use crate::params::TissueParams;

const MAGIC: &[u8; 4] = b"MRFD";
const VERSION: u32 = 1;
/// Stored rows must be unit norm to within this much.
const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    sequence: PulseSequence,
    grid: ParamGrid,
    params: Vec<TissueParams>,
    entries: CMatrix,
    raw_norms: Vec<f64>,
}

/// Simulates every point and normalizes each row in place. Returns the
/// signals (one row per point) and their norms before normalization.
pub(crate) fn simulate_normalized(points: &[TissueParams], seq: &PulseSequence) -> Result<(CMatrix, Vec<f64>)> {
    let t = seq.len();
    let mut data = vec![Complex::ZERO; points.len() * t];
    let mut norms = vec![0.0; points.len()];
    data.par_chunks_mut(t)
        .zip(norms.par_iter_mut())
        .zip(points.par_iter())
        .try_for_each(|((row, norm), p)| -> Result<()> {
            let s = simulate_signal(p, seq)?;
            let n = l2_norm(&s);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroSignal);
            }
            for (dst, z) in row.iter_mut().zip(&s) {
                *dst = z.scale(1.0 / n);
            }
            *norm = n;
            Ok(())
        })?;
    Ok((CMatrix::new(points.len(), t, data)?, norms))
}

/// One unit-norm fingerprint per feasible lattice point, in lexicographic
/// (T1, T2, B0) order, all with unit proton density.
pub fn build_dictionary(grid: &ParamGrid, seq: &PulseSequence) -> Result<Dictionary> {
    grid.validate()?;
    seq.validate()?;
    let params = grid.points();
    if params.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (entries, raw_norms) = simulate_normalized(&params, seq)?;
    Ok(Dictionary {
        sequence: seq.clone(),
        grid: grid.clone(),
        params,
        entries,
        raw_norms,
    })
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.entries.cols()
    }

    pub fn sequence(&self) -> &PulseSequence {
        &self.sequence
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn params(&self) -> &[TissueParams] {
        &self.params
    }

    /// D × T, unit rows.
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &[Complex] {
        self.entries.row(k)
    }

    pub fn raw_norm(&self, k: usize) -> f64 {
        self.raw_norms[k]
    }

    /// Entry `k` at its simulated (unnormalized) amplitude.
    pub fn raw_entry(&self, k: usize) -> Vec<Complex> {
        self.entry(k).iter().map(|z| z.scale(self.raw_norms[k])).collect()
    }

    /// Overwrites row `to` with row `from`, producing an exact tie.
    #[cfg(test)]
    pub(crate) fn with_row_copied(mut self, from: usize, to: usize) -> Self {
        let t = self.signal_len();
        let row = self.entry(from).to_vec();
        self.entries.as_mut_slice()[to * t..(to + 1) * t].copy_from_slice(&row);
        self.raw_norms[to] = self.raw_norms[from];
        self
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
        write_grid(&mut w, &self.grid)?;
        w.u64(self.len() as u64)?;
        for (k, p) in self.params.iter().enumerate() {
            w.f64s(&[p.t1, p.t2, p.b0, self.raw_norms[k]])?;
            w.complex(self.entry(k))?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let sequence = PulseSequence::read(&mut r)?;
        let grid = read_grid(&mut r)?;
        let d = r.u64()?;
        if d == 0 {
            return Err(Error::EmptyDictionary);
        }
        let t = sequence.len();
        if d as usize != grid.len() {
            return Err(Error::Format(format!(
                "dictionary holds {d} entries but its grid has {} feasible points",
                grid.len()
            )));
        }
        let d = d as usize;
        let mut params = Vec::with_capacity(d);
        let mut raw_norms = Vec::with_capacity(d);
        let mut data = Vec::with_capacity(d * t);
        for k in 0..d {
            let h = r.f64s(4)?;
            let p = TissueParams::new(h[0], h[1], h[2], 1.0);
            p.validate().map_err(|e| Error::Format(format!("entry {k}: {e}")))?;
            if !(h[3] > 0.0 && h[3].is_finite()) {
                return Err(Error::Format(format!("entry {k}: bad raw norm {}", h[3])));
            }
            let row = r.complex(t)?;
            if (l2_norm(&row) - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Format(format!("entry {k} is not unit norm")));
            }
            params.push(p);
            raw_norms.push(h[3]);
            data.extend(row);
        }
        r.finish()?;
        Ok(Dictionary {
            sequence,
            grid,
            params,
            entries: CMatrix::new(d, t, data)?,
            raw_norms,
        })
    }
}

fn write_grid<W: Write>(w: &mut Writer<W>, grid: &ParamGrid) -> Result<()> {
    for axis in [&grid.t1, &grid.t2, &grid.b0] {
        w.len(axis.len())?;
        w.f64s(axis)?;
    }
    Ok(())
}

fn read_grid<R: Read>(r: &mut Reader<R>) -> Result<ParamGrid> {
    let mut axes = Vec::with_capacity(3);
    for name in ["t1", "t2", "b0"] {
        let n = r.count(name)?;
        axes.push(r.f64s(n)?);
    }
    let b0 = axes.pop().expect("three axes");
    let t2 = axes.pop().expect("three axes");
    let t1 = axes.pop().expect("three axes");
    ParamGrid::new(t1, t2, b0).map_err(|e| Error::Format(format!("stored grid: {e}")))
}
