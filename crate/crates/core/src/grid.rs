//! The (T1, T2, B0) lattice behind the dictionary and the training samples.
//!
//! Grid files are TOML with one table per parameter. Each table lists
//! explicit `values`, inclusive `ranges` of `[start, stop, step]`, or both;
//! the union is sorted and deduplicated:
//!
//! ```toml
//! [t1]
//! ranges = [[100, 2000, 50], [2200, 5000, 300]]
//! [t2]
//! values = [20, 40, 80]
//! [b0]
//! ranges = [[-60, 60, 2]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::TissueParams;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub b0: Vec<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    #[serde(default)]
    values: Vec<f64>,
    #[serde(default)]
    ranges: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    t1: AxisSpec,
    t2: AxisSpec,
    b0: AxisSpec,
}

/// Inclusive `start, start+step, … ≤ stop`.
pub fn inclusive_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite()) || stop < start {
        return Err(Error::InvalidConfig(format!("bad range [{start}, {stop}, {step}]")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn axis_values(name: &str, spec: &AxisSpec) -> Result<Vec<f64>> {
    let mut out = spec.values.clone();
    for r in &spec.ranges {
        out.extend(inclusive_range(r[0], r[1], r[2])?);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name}: non-finite value")));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

impl ParamGrid {
    pub fn new(t1: Vec<f64>, t2: Vec<f64>, b0: Vec<f64>) -> Result<Self> {
        let grid = ParamGrid { t1, t2, b0 };
        grid.validate()?;
        Ok(grid)
    }

    /// T1 ∈ {100..2000 step 50} ∪ {2200..5000 step 300} ms,
    /// T2 ∈ {20..100 step 5} ∪ {110..300 step 20} ms, B0 ∈ {−60..60 step 2} Hz.
    pub fn default_grid() -> Self {
        let cat = |a: Vec<f64>, b: Vec<f64>| a.into_iter().chain(b).collect::<Vec<_>>();
        let r = |a, b, c| inclusive_range(a, b, c).expect("static range");
        ParamGrid {
            t1: cat(r(100.0, 2000.0, 50.0), r(2200.0, 5000.0, 300.0)),
            t2: cat(r(20.0, 100.0, 5.0), r(110.0, 300.0, 20.0)),
            b0: r(-60.0, 60.0, 2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("t1", &self.t1), ("t2", &self.t2), ("b0", &self.b0)] {
            if axis.is_empty() {
                return Err(Error::EmptyGrid);
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidConfig(format!("{name} values must be strictly ascending")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name}: non-finite value")));
            }
        }
        if self.t1[0] <= 0.0 || self.t2[0] <= 0.0 {
            return Err(Error::InvalidConfig("relaxation times must be positive".into()));
        }
        Ok(())
    }

    /// Feasible lattice points (T2 ≤ T1), lexicographic in (T1, T2, B0),
    /// with unit proton density.
    pub fn points(&self) -> Vec<TissueParams> {
        let mut out = Vec::with_capacity(self.t1.len() * self.t2.len() * self.b0.len());
        for &t1 in &self.t1 {
            for &t2 in self.t2.iter().filter(|&&t2| t2 <= t1) {
                for &b0 in &self.b0 {
                    out.push(TissueParams::new(t1, t2, b0, 1.0));
                }
            }
        }
        out
    }

    /// Number of feasible lattice points.
    pub fn len(&self) -> usize {
        self.t1
            .iter()
            .map(|&t1| self.t2.iter().filter(|&&t2| t2 <= t1).count())
            .sum::<usize>()
            * self.b0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: GridSpec = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        ParamGrid::new(
            axis_values("t1", &spec.t1)?,
            axis_values("t2", &spec.t2)?,
            axis_values("b0", &spec.b0)?,
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes with explicit value lists.
    pub fn to_config_string(&self) -> String {
        let axis = |v: &Vec<f64>| AxisSpec {
            values: v.clone(),
            ranges: Vec::new(),
        };
        let spec = GridSpec {
            t1: axis(&self.t1),
            t2: axis(&self.t2),
            b0: axis(&self.b0),
        };
        toml::to_string(&spec).expect("grid serializes")
    }
}
