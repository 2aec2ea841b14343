//! Brute-force inner-product nearest-neighbor matching.
//!
//! Every test signal is normalized and scored against all dictionary rows by
//! `|⟨entry, s⟩|`. Signals are scored in blocks with one real GEMM against
//! the dictionary viewed as an interleaved `D × 2T` real matrix: the row
//! `[re s, im s]` yields `Re⟨e, s⟩` and the row `[im s, −re s]` yields
//! `Im⟨e, s⟩`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::complex::{as_interleaved, l2_norm, Complex};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::params::{Label, TissueParams};

/// Signals scored per GEMM.
const BLOCK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub index: usize,
    /// Matched entry parameters, with proton density estimated from the
    /// test signal norm.
    pub params: TissueParams,
    /// `|⟨entry, s/‖s‖⟩|`, in `[0, 1]`.
    pub score: f64,
}

/// Per-pixel parameter maps. Pixels that could not be matched are
/// `valid = false` and hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterMaps {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub b0: Vec<f64>,
    pub pd: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ParameterMaps {
    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn get(&self, label: Label) -> &[f64] {
        match label {
            Label::T1 => &self.t1,
            Label::T2 => &self.t2,
            Label::B0 => &self.b0,
        }
    }
}

/// Proton density as the ratio of the test signal norm to the simulated
/// norm of the matched entry.
pub fn estimate_pd(signal: &[Complex], matched_entry_raw_norm: f64) -> f64 {
    l2_norm(signal) / matched_entry_raw_norm
}

/// Best entry for `signal`; ties go to the lowest index.
pub fn match_signal(dict: &Dictionary, signal: &[Complex]) -> Result<Match> {
    match_batch(dict, &[signal]).pop().expect("one result per signal")
}

/// [`match_signal`] over many signals. Each result is independent, so one
/// bad signal does not affect the others.
pub fn match_batch(dict: &Dictionary, signals: &[&[Complex]]) -> Vec<Result<Match>> {
    if dict.is_empty() {
        return signals.iter().map(|_| Err(Error::EmptyDictionary)).collect();
    }
    signals
        .par_chunks(BLOCK)
        .flat_map_iter(|block| match_block(dict, block))
        .collect()
}

fn match_block(dict: &Dictionary, block: &[&[Complex]]) -> Vec<Result<Match>> {
    let t = dict.signal_len();
    let d = dict.len();
    let mut results: Vec<Result<Match>> = Vec::with_capacity(block.len());
    let mut rows: Vec<(usize, f64)> = Vec::with_capacity(block.len());
    // Rows 2j and 2j+1 hold the two real encodings of the j-th usable signal.
    let mut lhs = Vec::with_capacity(2 * block.len() * 2 * t);
    for (j, s) in block.iter().enumerate() {
        if s.len() != t {
            results.push(Err(Error::mismatch("match_signal", t, s.len())));
            continue;
        }
        let n = l2_norm(s);
        if n == 0.0 || !n.is_finite() {
            results.push(Err(Error::ZeroSignal));
            continue;
        }
        results.push(Err(Error::ZeroSignal));
        rows.push((j, n));
        let inv = 1.0 / n;
        lhs.extend(s.iter().flat_map(|z| [z.re * inv, z.im * inv]));
        lhs.extend(s.iter().flat_map(|z| [z.im * inv, -z.re * inv]));
    }
    if rows.is_empty() {
        return results;
    }

    let a = ArrayView2::from_shape((2 * rows.len(), 2 * t), &lhs).expect("lhs shape");
    let e = ArrayView2::from_shape((d, 2 * t), as_interleaved(dict.entries().as_slice())).expect("dictionary shape");
    let mut scores = Array2::<f64>::zeros((2 * rows.len(), d));
    general_mat_mul(1.0, &a, &e.t(), 0.0, &mut scores);

    for (r, &(j, norm)) in rows.iter().enumerate() {
        let re = scores.row(2 * r);
        let im = scores.row(2 * r + 1);
        let mut best = 0;
        let mut best_sq = f64::NEG_INFINITY;
        for k in 0..d {
            let sq = re[k] * re[k] + im[k] * im[k];
            if sq > best_sq {
                best_sq = sq;
                best = k;
            }
        }
        let mut params = dict.params()[best];
        params.pd = norm / dict.raw_norm(best);
        results[j] = Ok(Match {
            index: best,
            params,
            score: best_sq.sqrt().min(1.0),
        });
    }
    results
}

/// Matches every pixel. Pixels whose match fails (zero or mismatched
/// signals) are masked out rather than aborting the image.
pub fn match_image(dict: &Dictionary, signals: &[&[Complex]]) -> ParameterMaps {
    let n = signals.len();
    let mut maps = ParameterMaps {
        t1: vec![0.0; n],
        t2: vec![0.0; n],
        b0: vec![0.0; n],
        pd: vec![0.0; n],
        valid: vec![false; n],
    };
    for (i, m) in match_batch(dict, signals).into_iter().enumerate() {
        if let Ok(m) = m {
            maps.t1[i] = m.params.t1;
            maps.t2[i] = m.params.t2;
            maps.b0[i] = m.params.b0;
            maps.pd[i] = m.params.pd;
            maps.valid[i] = true;
        }
    }
    maps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{default_sequence, simulate_signal};
    use crate::complex::inner_product;
    use crate::dictionary::build_dictionary;
    use crate::grid::ParamGrid;

    fn dict() -> Dictionary {
        let g = ParamGrid::new(
            vec![300.0, 600.0, 1000.0, 1600.0],
            vec![30.0, 60.0, 120.0],
            vec![-30.0, -10.0, 0.0, 10.0, 30.0],
        )
        .unwrap();
        build_dictionary(&g, &default_sequence(0)).unwrap()
    }

    #[test]
    fn self_match_is_exact() {
        let d = dict();
        let signals: Vec<&[Complex]> = (0..d.len()).map(|k| d.entry(k)).collect();
        for (k, m) in match_batch(&d, &signals).into_iter().enumerate() {
            let m = m.unwrap();
            assert_eq!(m.index, k);
            assert_eq!((m.params.t1, m.params.t2, m.params.b0), (d.params()[k].t1, d.params()[k].t2, d.params()[k].b0));
            assert!((m.score - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn agrees_with_direct_scan() {
        let d = dict();
        let s = simulate_signal(&TissueParams::new(777.0, 77.0, 7.0, 1.3), d.sequence()).unwrap();
        let norm = l2_norm(&s);
        let direct: Vec<f64> = (0..d.len())
            .map(|k| inner_product(d.entry(k), &s).unwrap().magnitude() / norm)
            .collect();
        let best = (0..d.len()).fold(0, |b, k| if direct[k] > direct[b] { k } else { b });
        let m = match_signal(&d, &s).unwrap();
        assert_eq!(m.index, best);
        assert!((m.score - direct[best]).abs() < 1e-12);
    }

    #[test]
    fn global_phase_is_ignored() {
        let d = dict();
        let s = simulate_signal(&TissueParams::new(900.0, 70.0, -5.0, 1.0), d.sequence()).unwrap();
        let base = match_signal(&d, &s).unwrap();
        for theta in [0.3, 1.7, -2.9, std::f64::consts::PI] {
            let rotated: Vec<Complex> = s.iter().map(|z| *z * Complex::cis(theta)).collect();
            let m = match_signal(&d, &rotated).unwrap();
            assert_eq!(m.index, base.index);
            assert!((m.score - base.score).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let d = dict().with_row_copied(9, 4);
        assert_eq!(d.entry(4), d.entry(9));
        assert_eq!(match_signal(&d, d.entry(9)).unwrap().index, 4);
        assert_eq!(match_signal(&d, d.entry(4)).unwrap().index, 4);
    }

    #[test]
    fn proton_density_from_norm() {
        let d = dict();
        let k = 17;
        let raw = d.raw_entry(k);
        assert!((estimate_pd(&raw, d.raw_norm(k)) - 1.0).abs() < 1e-12);
        let twice: Vec<Complex> = raw.iter().map(|z| z.scale(2.0)).collect();
        let m = match_signal(&d, &twice).unwrap();
        assert_eq!(m.index, k);
        assert!((m.params.pd - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors_and_masking() {
        let d = dict();
        let zero = vec![Complex::ZERO; d.signal_len()];
        assert!(matches!(match_signal(&d, &zero), Err(Error::ZeroSignal)));
        assert!(matches!(
            match_signal(&d, &zero[..3]),
            Err(Error::DimensionMismatch { .. })
        ));

        let good = d.entry(5);
        let maps = match_image(&d, &[&zero, good, &zero]);
        assert_eq!(maps.valid, vec![false, true, false]);
        assert_eq!(maps.t1[1], d.params()[5].t1);

        let single = match_image(&d, &[good]);
        let m = match_signal(&d, good).unwrap();
        assert_eq!((single.t1[0], single.t2[0], single.b0[0]), (m.params.t1, m.params.t2, m.params.b0));

        let blank = match_image(&d, &[&zero, &zero]);
        assert!(blank.valid.iter().all(|v| !v));
    }
}
