//! Runs every method over the phantom at each noise level and collects
//! NRMSE, FLOPs and parameter maps.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::complex::{CVector, Complex};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::evaluation::flops::{count_flops, MethodDescriptor};
use crate::evaluation::metrics::label_nrmse;
use crate::evaluation::noise::add_noise_stream;
use crate::evaluation::phantom::Phantom;
use crate::matcher::match_image;
use crate::model::RegressionModel;
use crate::network::Method;
use crate::params::Label;

/// Error maps are drawn at this multiple of the parameter display range.
pub const ERROR_MAP_GAIN: f64 = 5.0;

/// Trained regressors keyed by method and parameter.
#[derive(Clone, Debug, Default)]
pub struct ModelSet {
    models: BTreeMap<(Method, Label), RegressionModel>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, method: Method, model: RegressionModel) {
        self.models.insert((method, model.label), model);
    }

    pub fn get(&self, method: Method, label: Label) -> Option<&RegressionModel> {
        self.models.get(&(method, label))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonConfig {
    pub methods: Vec<Method>,
    pub labels: Vec<Label>,
    /// pSNR levels in dB; `f64::INFINITY` means noiseless.
    pub noise_levels: Vec<f64>,
    pub noise_seed: u64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            methods: Method::ALL.to_vec(),
            labels: Label::ALL.to_vec(),
            noise_levels: vec![f64::INFINITY, 40.0],
            noise_seed: 0,
        }
    }
}

/// `flops` is the per-pixel cost of producing this parameter: the full
/// dictionary scan for nearest neighbor, one network pass otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: Method,
    pub parameter: Label,
    /// pSNR in dB; infinite for clean signals.
    pub psnr: f64,
    pub nrmse: f64,
    pub flops: u64,
}

/// A predicted map. `label == None` marks the proton-density map, which
/// only nearest-neighbor matching produces.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedMap {
    pub method: Method,
    pub label: Option<Label>,
    pub psnr: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub truth: BTreeMap<Label, Vec<f64>>,
    pub truth_pd: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub maps: Vec<PredictedMap>,
    /// Wall-clock inference time per method, summed over noise levels.
    pub runtime: Vec<(Method, Duration)>,
}

pub fn noise_tag(psnr: f64) -> String {
    if psnr == f64::INFINITY {
        "clean".into()
    } else {
        format!("psnr{psnr}")
    }
}

pub fn run_comparison(
    dict: &Dictionary,
    models: &ModelSet,
    phantom: &Phantom,
    cfg: &ComparisonConfig,
) -> Result<EvalReport> {
    let seq = dict.sequence();
    for &method in &cfg.methods {
        if method == Method::NearestNeighbor {
            continue;
        }
        for &label in &cfg.labels {
            let model = models.get(method, label).ok_or_else(|| {
                Error::InvalidConfig(format!("no {method} model for {label}"))
            })?;
            if model.input_len != seq.len() {
                return Err(Error::mismatch("model input", seq.len(), model.input_len));
            }
            let want = method.network_config().expect("network method");
            let have = model.config();
            if (have.kind, have.activation, &have.hidden) != (want.kind, want.activation, &want.hidden) {
                return Err(Error::InvalidConfig(format!(
                    "{label} model does not have the {method} architecture"
                )));
            }
        }
    }
    for &psnr in &cfg.noise_levels {
        if psnr.is_nan() {
            return Err(Error::InvalidConfig("pSNR is NaN".into()));
        }
    }

    let mask = phantom.mask();
    let pixels: Vec<usize> = (0..phantom.len()).filter(|&i| mask[i]).collect();
    if pixels.is_empty() {
        return Err(Error::EmptyMask);
    }
    let clean = phantom.signals(seq)?;
    let truth: BTreeMap<Label, Vec<f64>> = cfg.labels.iter().map(|&l| (l, phantom.truth(l))).collect();

    let mut rows = Vec::new();
    let mut maps = Vec::new();
    let mut runtime: BTreeMap<Method, Duration> = BTreeMap::new();
    for &psnr in &cfg.noise_levels {
        let signals: Vec<CVector> = pixels
            .iter()
            .map(|&i| add_noise_stream(&clean[i], psnr, cfg.noise_seed, i as u64))
            .collect();
        let refs: Vec<&[Complex]> = signals.iter().map(Vec::as_slice).collect();
        let scatter = |values: &[f64]| {
            let mut full = vec![0.0; phantom.len()];
            for (&i, &v) in pixels.iter().zip(values) {
                full[i] = v;
            }
            full
        };

        for &method in &cfg.methods {
            let start = Instant::now();
            let predicted: Vec<(Label, Vec<f64>, u64)> = if method == Method::NearestNeighbor {
                let m = match_image(dict, &refs);
                maps.push(PredictedMap {
                    method,
                    label: None,
                    psnr,
                    values: scatter(&m.pd),
                });
                let flops = count_flops(&MethodDescriptor::NearestNeighbor {
                    entries: dict.len(),
                    signal_len: dict.signal_len(),
                });
                cfg.labels.iter().map(|&l| (l, scatter(m.get(l)), flops)).collect()
            } else {
                let mut per_label = Vec::new();
                for &label in &cfg.labels {
                    let model = models.get(method, label).expect("checked above");
                    let flops = count_flops(&MethodDescriptor::Network(model.config()));
                    per_label.push((label, scatter(&model.predict_batch(&refs)?), flops));
                }
                per_label
            };
            *runtime.entry(method).or_default() += start.elapsed();

            for (label, values, flops) in predicted {
                rows.push(ReportRow {
                    method,
                    parameter: label,
                    psnr,
                    nrmse: label_nrmse(label, &values, &truth[&label], &mask)?,
                    flops,
                });
                maps.push(PredictedMap {
                    method,
                    label: Some(label),
                    psnr,
                    values,
                });
            }
        }
    }

    Ok(EvalReport {
        width: phantom.width,
        height: phantom.height,
        mask,
        truth,
        truth_pd: phantom.pd(),
        rows,
        maps,
        runtime: runtime.into_iter().collect(),
    })
}

impl EvalReport {
    pub fn nrmse(&self, method: Method, label: Label, psnr: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.parameter == label && r.psnr == psnr)
            .map(|r| r.nrmse)
    }

    /// `method,parameter,noise,nrmse,flops`, one row per method, parameter
    /// and noise level.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            method: &'a str,
            parameter: &'a str,
            noise: String,
            nrmse: f64,
            flops: u64,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(Line {
                method: r.method.name(),
                parameter: r.parameter.name(),
                noise: noise_tag(r.psnr),
                nrmse: r.nrmse,
                flops: r.flops,
            })
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.csv`, one PGM per predicted map and a 5× error map
    /// beside each map that has a ground truth.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut csv = BufWriter::new(File::create(dir.join("report.csv"))?);
        self.write_csv(&mut csv)?;
        csv.flush()?;

        for map in &self.maps {
            let (name, truth) = match map.label {
                Some(l) => (l.name(), &self.truth[&l]),
                None => ("pd", &self.truth_pd),
            };
            let (lo, hi) = display_range(truth, &self.mask);
            let stem = format!("{}_{}_{}", map.method.name(), name, noise_tag(map.psnr));
            let scaled: Vec<f64> = map.values.iter().map(|&v| (v - lo) / (hi - lo)).collect();
            write_pgm(dir.join(format!("{stem}.pgm")), self.width, self.height, &scaled, &self.mask)?;
            let error: Vec<f64> = map
                .values
                .iter()
                .zip(truth)
                .map(|(&p, &t)| ERROR_MAP_GAIN * (p - t).abs() / (hi - lo))
                .collect();
            write_pgm(dir.join(format!("{stem}_error.pgm")), self.width, self.height, &error, &self.mask)?;
        }
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Spans zero and the masked truth values.
fn display_range(truth: &[f64], mask: &[bool]) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (&t, &m) in truth.iter().zip(mask) {
        if m {
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    if hi - lo <= 0.0 {
        hi = lo + 1.0;
    }
    (lo, hi)
}

/// Binary 8-bit graymap of `values` in `[0, 1]`, clamped; unmasked pixels
/// are black.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64], mask: &[bool]) -> Result<()> {
    if values.len() != width * height || mask.len() != values.len() {
        return Err(Error::mismatch("pgm", width * height, values.len()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { (v.clamp(0.0, 1.0) * 255.0).round() as u8 } else { 0 })
        .collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::default_sequence;
    use crate::dictionary::build_dictionary;
    use crate::evaluation::phantom::{build_phantom, PhantomSpec, Region};
    use crate::grid::ParamGrid;

    fn lattice_phantom() -> Phantom {
        let region = |t1, t2, pd, a| Region {
            name: format!("{t1}"),
            t1,
            t2,
            pd,
            semi_axes: [a, a],
        };
        build_phantom(&PhantomSpec {
            width: 7,
            height: 7,
            b0_range: [-60.0, 60.0],
            regions: vec![region(1600.0, 200.0, 1.0, 1.0), region(800.0, 80.0, 0.8, 0.6)],
        })
        .unwrap()
    }

    fn lattice_dict() -> Dictionary {
        let g = ParamGrid::new(
            vec![400.0, 800.0, 1600.0],
            vec![40.0, 80.0, 200.0],
            (-3..=3).map(|k| 20.0 * k as f64).collect(),
        )
        .unwrap();
        build_dictionary(&g, &default_sequence(0)).unwrap()
    }

    fn untrained_models() -> ModelSet {
        let mut set = ModelSet::new();
        for (i, method) in Method::NETWORKS.into_iter().enumerate() {
            for label in Label::ALL {
                let cfg = method.network_config().unwrap();
                set.insert(method, RegressionModel::new(&cfg, label, i as u64).unwrap());
            }
        }
        set
    }

    #[test]
    fn nearest_neighbor_is_exact_on_lattice() {
        let cfg = ComparisonConfig {
            methods: vec![Method::NearestNeighbor],
            noise_levels: vec![f64::INFINITY],
            ..ComparisonConfig::default()
        };
        let phantom = lattice_phantom();
        let report = run_comparison(&lattice_dict(), &ModelSet::new(), &phantom, &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert_eq!(row.nrmse, 0.0, "{row:?}");
        }
        let pd = &report.maps.iter().find(|m| m.label.is_none()).unwrap().values;
        for (i, &v) in pd.iter().enumerate() {
            assert!((v - report.truth_pd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn report_shape_and_determinism() {
        let dict = lattice_dict();
        let models = untrained_models();
        let phantom = lattice_phantom();
        let cfg = ComparisonConfig::default();
        let a = run_comparison(&dict, &models, &phantom, &cfg).unwrap();
        assert_eq!(a.rows.len(), 6 * 3 * 2);
        assert!(a.rows.iter().all(|r| r.nrmse >= 0.0));

        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path().join("a")).unwrap();
        let b = run_comparison(&dict, &models, &phantom, &cfg).unwrap();
        b.save(dir.path().join("b")).unwrap();
        for entry in fs::read_dir(dir.path().join("a")).unwrap() {
            let name = entry.unwrap().file_name();
            let x = fs::read(dir.path().join("a").join(&name)).unwrap();
            let y = fs::read(dir.path().join("b").join(&name)).unwrap();
            assert_eq!(x, y, "{name:?} differs");
        }

        let csv = fs::read_to_string(dir.path().join("a/report.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("method,parameter,noise,nrmse,flops"));
        assert_eq!(lines.count(), 36);
        assert!(csv.contains("nearest-neighbor,t1,clean,0.0,"));

        let pgm = fs::read(dir.path().join("a/complex-cardioid_t2_psnr40_error.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n7 7\n255\n"));
        assert_eq!(pgm.len(), b"P5\n7 7\n255\n".len() + 49);
        assert!(dir.path().join("a/nearest-neighbor_pd_clean.pgm").exists());
    }

    #[test]
    fn missing_model_is_reported() {
        let cfg = ComparisonConfig {
            methods: vec![Method::Real],
            ..ComparisonConfig::default()
        };
        assert!(matches!(
            run_comparison(&lattice_dict(), &ModelSet::new(), &lattice_phantom(), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
