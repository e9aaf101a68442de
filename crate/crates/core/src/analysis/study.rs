//! Seeded trial ensembles comparing estimators against converged reference modes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{captured_energy, cumulative_energy, decorrelation_time, mode_similarity};
use crate::decomposition::{space_only_pod, spacetime_pod, spacetime_pod_toeplitz, Method, ModeSet, WeightSpec};
use crate::error::{Error, Result};
use crate::timeseries::{derive_seed, generate, subtract_temporal_mean, GeneratorSpec, SnapshotSeries};

/// Number of equal-width PDF bins.
pub const PDF_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metric {
    /// Similarity of trial mode `mode` (zero-based) with reference mode `mode`.
    Similarity { mode: usize },
    /// Energy captured by trial mode `mode`.
    CapturedEnergy { mode: usize },
    /// Energy captured by the first `k` trial modes together.
    CumulativeEnergy { k: usize },
}

impl Metric {
    fn modes_needed(self) -> usize {
        match self {
            Metric::Similarity { mode } | Metric::CapturedEnergy { mode } => mode + 1,
            Metric::CumulativeEnergy { k } => k,
        }
    }

    pub fn name(self) -> String {
        match self {
            Metric::Similarity { mode } => format!("similarity[{}]", mode + 1),
            Metric::CapturedEnergy { mode } => format!("captured-energy[{}]", mode + 1),
            Metric::CumulativeEnergy { k } => format!("cumulative-energy[1..{k}]"),
        }
    }

    fn evaluate(self, trial: &ModeSet, reference: &ModeSet) -> Result<f64> {
        match self {
            Metric::Similarity { mode } => {
                if mode >= trial.len() || mode >= reference.len() {
                    return Ok(0.0);
                }
                mode_similarity(trial.mode(mode), reference.mode(mode), &reference.weight)
            }
            Metric::CapturedEnergy { mode } => {
                if mode >= trial.len() {
                    return Ok(0.0);
                }
                captured_energy(trial.mode(mode), reference)
            }
            Metric::CumulativeEnergy { k } => {
                let k = k.min(trial.len());
                cumulative_energy(&trial.modes.columns(0, k).into_owned(), reference)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeanHandling {
    Raw,
    Subtract,
    /// Run every cell under both conventions.
    Both,
}

/// One grid cell: a method with its matrix shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellConfig {
    #[serde(serialize_with = "ser_method")]
    pub method: Method,
    /// Realizations (columns) per trial.
    pub m: usize,
    pub d: usize,
    /// Column spacing; only used by `spaced`.
    pub s: usize,
}

fn ser_method<S: serde::Serializer>(m: &Method, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(m.name())
}

impl CellConfig {
    pub fn new(method: Method, m: usize, d: usize, s: usize) -> Self {
        Self { method, m, d, s }
    }

    /// Series length consumed by one trial.
    pub fn series_len(&self) -> usize {
        match self.method {
            Method::Spaced => (self.m - 1) * self.s + self.d,
            Method::SpaceOnly => self.m,
            Method::Hankel | Method::Toeplitz => self.m + self.d - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 || self.s == 0 {
            return Err(Error::InvalidParameter(format!("invalid cell {self:?}: m, d, s must be >= 1")));
        }
        if self.method == Method::SpaceOnly && self.d != 1 {
            return Err(Error::InvalidParameter("space-only cells need d = 1".into()));
        }
        Ok(())
    }
}

/// How converged reference modes are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceSpec {
    /// Reference series is at least this many times the longest study series.
    pub length_factor: usize,
    pub min_length: usize,
    /// Two independent references must have leading-mode similarity at least this.
    pub gate: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            length_factor: 100,
            min_length: 100_000,
            gate: 0.999,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub generator: GeneratorSpec,
    pub dt: f64,
    pub cells: Vec<CellConfig>,
    pub metric: Metric,
    pub trials: usize,
    pub seed: u64,
    pub weight: Option<WeightSpec>,
    pub reference: ReferenceSpec,
    pub mean: MeanHandling,
}

impl StudyConfig {
    pub fn new(generator: GeneratorSpec, dt: f64, cells: Vec<CellConfig>, metric: Metric, trials: usize, seed: u64) -> Self {
        Self {
            generator,
            dt,
            cells,
            metric,
            trials,
            seed,
            weight: None,
            reference: ReferenceSpec::default(),
            mean: MeanHandling::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pdf {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Pdf {
    /// Equal-width histogram density over the observed range.
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if samples.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in samples {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let total = samples.len().max(1) as f64;
        Self {
            edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
            density: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(p, e)| p * (e[1] - e[0]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub cell: CellConfig,
    pub mean_removed: bool,
    pub n: usize,
    pub series_len: usize,
    pub window: f64,
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub pdf: Pdf,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceInfo {
    pub d: usize,
    pub mean_removed: bool,
    pub length: usize,
    pub seeds: [u64; 2],
    /// Leading-mode similarity between the two independent references.
    pub agreement: f64,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub generator: String,
    pub dt: f64,
    pub metric: String,
    pub seed: u64,
    pub trials: usize,
    /// Measured `1/e` decorrelation time of the generator (time units).
    pub decorrelation_time: Option<f64>,
    pub references: Vec<ReferenceInfo>,
    pub cells: Vec<CellReport>,
}

impl StudyReport {
    /// Long-format CSV: one row per (cell, trial).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,method,m,d,s,N,L,T,mean_removed,trial,seed,metric,value\n");
        for (ci, c) in self.cells.iter().enumerate() {
            for (t, (v, seed)) in c.values.iter().zip(&c.seeds).enumerate() {
                out.push_str(&format!(
                    "{ci},{},{},{},{},{},{},{},{},{t},{seed},{},{v}\n",
                    c.cell.method.name(),
                    c.cell.m,
                    c.cell.d,
                    c.cell.s,
                    c.n,
                    c.series_len,
                    c.window,
                    c.mean_removed,
                    self.metric,
                ));
            }
        }
        out
    }

    /// Summary without the per-trial samples.
    pub fn summary_json(&self) -> String {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "method": c.cell.method.name(),
                    "m": c.cell.m,
                    "d": c.cell.d,
                    "s": c.cell.s,
                    "N": c.n,
                    "L": c.series_len,
                    "T": c.window,
                    "mean_removed": c.mean_removed,
                    "trials": c.trials,
                    "mean": c.mean,
                    "median": c.median,
                    "pdf": c.pdf,
                })
            })
            .collect();
        let v = serde_json::json!({
            "generator": self.generator,
            "dt": self.dt,
            "metric": self.metric,
            "seed": self.seed,
            "trials": self.trials,
            "decorrelation_time": self.decorrelation_time,
            "references": self.references,
            "cells": cells,
        });
        serde_json::to_string_pretty(&v).expect("report serialises")
    }

    pub fn cell(&self, method: Method, m: usize, d: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.cell.method == method && c.cell.m == m && c.cell.d == d)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

const REFERENCE_STREAM: u64 = 0xFEED_0000_0000_0000;

/// Runs every (cell, trial) pair of the grid and aggregates the metric.
///
/// Trial `t` of a cell whose series has length `L` uses the generator seeded
/// with `derive_seed(seed, L, t)`, so methods sharing a series length see the
/// same realisation.
pub fn convergence_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if config.cells.is_empty() {
        return Err(Error::InvalidParameter("study grid is empty".into()));
    }
    for c in &config.cells {
        c.validate()?;
    }
    let n = config.generator.dim();
    let weight = config.weight.clone().unwrap_or_else(|| WeightSpec::uniform(n));
    if weight.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight has dimension {}, generator has N = {n}",
            weight.dim()
        )));
    }
    let mean_modes: Vec<bool> = match config.mean {
        MeanHandling::Raw => vec![false],
        MeanHandling::Subtract => vec![true],
        MeanHandling::Both => vec![false, true],
    };

    // converged references, one per (d, mean convention)
    let longest = config.cells.iter().map(CellConfig::series_len).max().unwrap_or(1);
    let ref_len = (config.reference.length_factor * longest).max(config.reference.min_length);
    let mut ref_keys: Vec<(usize, bool)> = config
        .cells
        .iter()
        .flat_map(|c| mean_modes.iter().map(move |&mr| (c.d, mr)))
        .collect();
    ref_keys.sort();
    ref_keys.dedup();
    let refs: Vec<(ModeSet, ReferenceInfo)> = ref_keys
        .par_iter()
        .map(|&(d, mean_removed)| build_reference(config, &weight, d, mean_removed, ref_len))
        .collect::<Result<_>>()?;
    let references: BTreeMap<(usize, bool), &ModeSet> =
        ref_keys.iter().copied().zip(refs.iter().map(|(m, _)| m)).collect();

    let probe_seed = derive_seed(config.seed, REFERENCE_STREAM, 2);
    let probe = generate(&config.generator.with_seed(probe_seed), ref_len, config.dt)?;
    let decorrelation = decorrelation_time(&probe);

    // trials grouped by series length so each realisation is generated once
    let mut lengths: Vec<usize> = config.cells.iter().map(CellConfig::series_len).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let jobs: Vec<(usize, usize)> = lengths
        .iter()
        .flat_map(|&l| (0..config.trials).map(move |t| (l, t)))
        .collect();
    let results: Vec<((usize, usize), Vec<(usize, bool, f64)>)> = jobs
        .par_iter()
        .map(|&(len, trial)| {
            let seed = derive_seed(config.seed, len as u64, trial as u64);
            let raw = generate(&config.generator.with_seed(seed), len, config.dt)?;
            let mut values = Vec::new();
            for &mean_removed in &mean_modes {
                let series = if mean_removed { subtract_temporal_mean(&raw).0 } else { raw.clone() };
                for (ci, cell) in config.cells.iter().enumerate() {
                    if cell.series_len() != len {
                        continue;
                    }
                    let modes = decompose(cell, &series, &weight, config.metric)?;
                    let reference = references[&(cell.d, mean_removed)];
                    values.push((ci, mean_removed, config.metric.evaluate(&modes, reference)?));
                }
            }
            Ok(((len, trial), values))
        })
        .collect::<Result<_>>()?;

    let mut by_cell: BTreeMap<(bool, usize), Vec<(usize, f64, u64)>> = BTreeMap::new();
    for ((len, trial), values) in &results {
        for &(ci, mr, v) in values {
            by_cell
                .entry((mr, ci))
                .or_default()
                .push((*trial, v, derive_seed(config.seed, *len as u64, *trial as u64)));
        }
    }
    let cells = by_cell
        .into_iter()
        .map(|((mean_removed, ci), mut samples)| {
            samples.sort_by_key(|s| s.0);
            let cell = config.cells[ci];
            let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
            CellReport {
                cell,
                mean_removed,
                n,
                series_len: cell.series_len(),
                window: (cell.d - 1) as f64 * config.dt,
                trials: values.len(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                median: median(&values),
                pdf: Pdf::from_samples(&values, PDF_BINS),
                seeds: samples.iter().map(|s| s.2).collect(),
                values,
            }
        })
        .collect();

    Ok(StudyReport {
        generator: config.generator.describe(),
        dt: config.dt,
        metric: config.metric.name(),
        seed: config.seed,
        trials: config.trials,
        decorrelation_time: decorrelation,
        references: refs.into_iter().map(|(_, info)| info).collect(),
        cells,
    })
}

fn decompose(cell: &CellConfig, series: &SnapshotSeries, weight: &WeightSpec, metric: Metric) -> Result<ModeSet> {
    match cell.method {
        Method::SpaceOnly => space_only_pod(series, weight),
        Method::Hankel => spacetime_pod(series, cell.d, 1, weight),
        Method::Spaced => spacetime_pod(series, cell.d, cell.s, weight),
        Method::Toeplitz => {
            let size = series.dim() * cell.d;
            spacetime_pod_toeplitz(series, cell.d, weight, metric.modes_needed().min(size))
        }
    }
}

fn build_reference(
    config: &StudyConfig,
    weight: &WeightSpec,
    d: usize,
    mean_removed: bool,
    len: usize,
) -> Result<(ModeSet, ReferenceInfo)> {
    let seeds = [0u64, 1].map(|k| derive_seed(config.seed, REFERENCE_STREAM ^ d as u64, k));
    let modes: Vec<ModeSet> = seeds
        .iter()
        .map(|&seed| {
            let raw = generate(&config.generator.with_seed(seed), len, config.dt)?;
            let series = if mean_removed { subtract_temporal_mean(&raw).0 } else { raw };
            if d == 1 {
                space_only_pod(&series, weight)
            } else {
                spacetime_pod(&series, d, 1, weight)
            }
        })
        .collect::<Result<_>>()?;
    let agreement = mode_similarity(modes[0].mode(0), modes[1].mode(0), weight)?;
    if agreement < config.reference.gate {
        return Err(Error::ReferenceNotConverged {
            similarity: agreement,
            gate: config.reference.gate,
        });
    }
    let info = ReferenceInfo {
        d,
        mean_removed,
        length: len,
        seeds,
        agreement,
        energies: modes[0].energies.iter().take(8).copied().collect(),
    };
    Ok((modes.into_iter().next().expect("two references"), info))
}

/// Column-count factor `c` such that a Hankel matrix with `c m` columns
/// matches the accuracy of `m` spaced columns.
///
/// Each curve is `(m, metric)` sorted by `m`; the Hankel curve is
/// interpolated linearly in `log m`. Returns the median factor over spaced
/// points the Hankel curve reaches, or `None` if it reaches none.
pub fn column_factor(spaced: &[(f64, f64)], hankel: &[(f64, f64)]) -> Option<f64> {
    let mut factors: Vec<f64> = spaced
        .iter()
        .filter_map(|&(m, v)| {
            hankel.windows(2).find_map(|w| {
                let (m0, v0) = w[0];
                let (m1, v1) = w[1];
                if v0 >= v {
                    Some(m0 / m)
                } else if v1 >= v {
                    let t = (v - v0) / (v1 - v0);
                    Some((m0.ln() + t * (m1.ln() - m0.ln())).exp() / m)
                } else {
                    None
                }
            })
        })
        .collect();
    if factors.is_empty() {
        return None;
    }
    factors.sort_by(f64::total_cmp);
    Some(median(&factors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_integrates_to_one() {
        let samples: Vec<f64> = (0..137).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let pdf = Pdf::from_samples(&samples, PDF_BINS);
        assert_eq!(pdf.density.len(), PDF_BINS);
        assert!((pdf.integral() - 1.0).abs() < 1e-12);
        let degenerate = Pdf::from_samples(&[0.3; 5], PDF_BINS);
        assert!((degenerate.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn column_factor_of_shifted_curve() {
        // hankel needs 4x the columns to match
        let curve = |m: f64| 1.0 - 1.0 / m;
        let spaced: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&m| (m, curve(m))).collect();
        let hankel: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0]
            .iter()
            .map(|&m| (m, curve(m / 4.0)))
            .collect();
        let c = column_factor(&spaced, &hankel).unwrap();
        assert!((c - 4.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = StudyConfig::new(
            GeneratorSpec::scalar_ou(5.0, 0),
            1.0,
            vec![CellConfig::new(Method::Hankel, 10, 5, 1)],
            Metric::Similarity { mode: 0 },
            0,
            1,
        );
        assert!(matches!(convergence_study(&cfg), Err(Error::InvalidParameter(_))));
    }
}
