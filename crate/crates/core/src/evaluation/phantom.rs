//! Geometric test phantom: concentric elliptical tissue regions under a
//! horizontal B0 ramp.
//!
//! Phantom files are TOML. Regions are painted in order, so later regions
//! cover earlier ones; `semi_axes` are fractions of the half-width and
//! half-height.
//!
//! ```toml
//! width = 64
//! height = 64
//! b0_range = [-60.0, 60.0]
//!
//! [[region]]
//! name = "csf"
//! t1 = 4000.0
//! t2 = 600.0
//! pd = 1.0
//! semi_axes = [0.92, 0.95]
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{simulate_signal, PulseSequence};
use crate::complex::CVector;
use crate::error::{Error, Result};
use crate::params::{Label, TissueParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    pub t1: f64,
    pub t2: f64,
    pub pd: f64,
    pub semi_axes: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// B0 at the left and right edges, in Hz.
    pub b0_range: [f64; 2],
    #[serde(rename = "region")]
    pub regions: Vec<Region>,
}

impl Default for PhantomSpec {
    /// 64×64 head-like layout: a CSF rim, gray matter, white matter and a
    /// central CSF ventricle, with B0 running from −60 Hz to +60 Hz.
    fn default() -> Self {
        let region = |name: &str, t1, t2, pd, a, b| Region {
            name: name.into(),
            t1,
            t2,
            pd,
            semi_axes: [a, b],
        };
        PhantomSpec {
            width: 64,
            height: 64,
            b0_range: [-60.0, 60.0],
            regions: vec![
                region("csf", 4000.0, 600.0, 1.0, 0.92, 0.95),
                region("gm", 830.0, 80.0, 0.85, 0.82, 0.86),
                region("wm", 500.0, 70.0, 0.7, 0.6, 0.66),
                region("csf", 4000.0, 600.0, 1.0, 0.14, 0.22),
            ],
        }
    }
}

impl PhantomSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("phantom spec serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub width: usize,
    pub height: usize,
    pub regions: Vec<Region>,
    /// Row-major region index per pixel; `None` is background.
    pub labels: Vec<Option<usize>>,
    /// Row-major B0 per pixel.
    pub b0: Vec<f64>,
}

pub fn build_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidConfig("phantom must be at least 1×1".into()));
    }
    if spec.regions.is_empty() {
        return Err(Error::InvalidConfig("phantom needs at least one region".into()));
    }
    if !spec.b0_range.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite B0 range".into()));
    }
    for r in &spec.regions {
        TissueParams::new(r.t1, r.t2, 0.0, r.pd)
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("region {}: {e}", r.name)))?;
        if !r.semi_axes.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidConfig(format!("region {}: semi-axes must be positive", r.name)));
        }
    }

    let (w, h) = (spec.width, spec.height);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut labels = vec![None; w * h];
    for (k, r) in spec.regions.iter().enumerate() {
        let ax = r.semi_axes[0] * w as f64 / 2.0;
        let ay = r.semi_axes[1] * h as f64 / 2.0;
        for y in 0..h {
            for x in 0..w {
                let u = (x as f64 - cx) / ax;
                let v = (y as f64 - cy) / ay;
                if u * u + v * v <= 1.0 {
                    labels[y * w + x] = Some(k);
                }
            }
        }
    }

    let [lo, hi] = spec.b0_range;
    let column_b0: Vec<f64> = (0..w)
        .map(|x| if w == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * x as f64 / (w - 1) as f64 })
        .collect();
    let b0 = (0..w * h).map(|i| column_b0[i % w]).collect();

    Ok(Phantom {
        width: w,
        height: h,
        regions: spec.regions.clone(),
        labels,
        b0,
    })
}

impl Phantom {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }

    /// Tissue parameters of pixel `i`, or `None` for background.
    pub fn params(&self, i: usize) -> Option<TissueParams> {
        self.labels[i].map(|k| {
            let r = &self.regions[k];
            TissueParams::new(r.t1, r.t2, self.b0[i], r.pd)
        })
    }

    /// Ground-truth map for `label`; background pixels are zero.
    pub fn truth(&self, label: Label) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.params(i).map_or(0.0, |p| p.get(label)))
            .collect()
    }

    pub fn pd(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.params(i).map_or(0.0, |p| p.pd)).collect()
    }

    /// Number of distinct tissue parameter sets.
    pub fn tissue_classes(&self) -> usize {
        let mut seen: Vec<(u64, u64, u64)> = self
            .regions
            .iter()
            .map(|r| (r.t1.to_bits(), r.t2.to_bits(), r.pd.to_bits()))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Simulated signal per pixel; background pixels are all-zero.
    pub fn signals(&self, seq: &PulseSequence) -> Result<Vec<CVector>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| match self.params(i) {
                Some(p) => simulate_signal(&p, seq),
                None => Ok(vec![Default::default(); seq.len()]),
            })
            .collect()
    }
}
