//! Mode-quality metrics and convergence studies.

mod study;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::decomposition::{ModeSet, WeightSpec};
use crate::embedding::reshape_mode;
use crate::error::{Error, Result};
use crate::timeseries::SnapshotSeries;

pub use study::{
    column_factor, convergence_study, median, CellConfig, CellReport, MeanHandling, Metric, Pdf, ReferenceInfo,
    ReferenceSpec, StudyConfig, StudyReport,
};

/// Squared W-inner product of two modes normalised by both W-norms: in `[0, 1]`,
/// invariant to scaling and sign of either argument.
pub fn mode_similarity(a: &[f64], b: &[f64], weight: &WeightSpec) -> Result<f64> {
    check_len(a.len(), b.len())?;
    weight.expanded(a.len())?;
    let ab = weight.inner(a, b);
    let aa = weight.inner(a, a);
    let bb = weight.inner(b, b);
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::InvalidParameter("mode has zero norm".into()));
    }
    Ok((ab * ab / (aa * bb)).min(1.0))
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("vectors of length {a} and {b}")));
    }
    Ok(())
}

/// Energy captured by `mode`: `sum_k c_k^2 lambda_k` with
/// `c_k = <phi, phi_k>_W / ||phi||_W` against converged reference modes.
pub fn captured_energy(mode: &[f64], reference: &ModeSet) -> Result<f64> {
    check_len(mode.len(), reference.modes.nrows())?;
    let w = &reference.weight;
    let norm2 = w.inner(mode, mode);
    if norm2 == 0.0 {
        return Err(Error::InvalidParameter("mode has zero norm".into()));
    }
    Ok((0..reference.len())
        .map(|k| {
            let c = w.inner(mode, reference.mode(k));
            c * c / norm2 * reference.energies[k]
        })
        .sum())
}

/// Energy captured by a W-orthonormal set of modes (columns of `modes`).
pub fn cumulative_energy(modes: &DMatrix<f64>, reference: &ModeSet) -> Result<f64> {
    check_len(modes.nrows(), reference.modes.nrows())?;
    let w = &reference.weight;
    let cols: Vec<Vec<f64>> = modes.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut defect = 0.0f64;
    for i in 0..cols.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((w.inner(&cols[i], &cols[j]) - target).abs());
        }
    }
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal(defect));
    }
    cols.iter().map(|c| captured_energy(c, reference)).sum()
}

/// Frequency content of a space-time mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePsd {
    /// `sum_x W_x |phihat(omega_j, x)|^2` for DFT bins `j = 0..d` (unnormalised forward DFT).
    pub power: Vec<f64>,
    /// Signed angular frequency of each bin.
    pub frequencies: Vec<f64>,
}

impl ModePsd {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Largest share of the total power held by one frequency, with the
    /// `+omega` and `-omega` bins of a real mode counted together.
    /// Returns `(bin index in 0..=d/2, fraction)`.
    pub fn peak_fraction(&self) -> (usize, f64) {
        let d = self.power.len();
        let total = self.total();
        (0..=d / 2)
            .map(|j| {
                let p = if j == 0 || 2 * j == d {
                    self.power[j]
                } else {
                    self.power[j] + self.power[d - j]
                };
                (j, if total > 0.0 { p / total } else { 0.0 })
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0))
    }
}

pub fn mode_psd(mode: &[f64], n: usize, d: usize, dt: f64, weight: &WeightSpec) -> Result<ModePsd> {
    let field = reshape_mode(mode, n, d)?;
    if weight.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight has dimension {}, mode has N = {n}",
            weight.dim()
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(d);
    let mut power = vec![0.0; d];
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for (x, w) in weight.as_slice().iter().enumerate() {
        for (t, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(field[(x, t)], 0.0);
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += w * z.norm_sqr();
        }
    }
    let frequencies = (0..d).map(|j| crate::spod::bin_frequency(j, d, dt)).collect();
    Ok(ModePsd { power, frequencies })
}

/// Mean over the `d` temporal slices of a space-time mode of their similarity
/// to a spatial mode.
pub fn time_averaged_spatial_similarity(
    spacetime_mode: &[f64],
    n: usize,
    d: usize,
    spatial_mode: &[f64],
    weight: &WeightSpec,
) -> Result<f64> {
    let field = reshape_mode(spacetime_mode, n, d)?;
    let mut total = 0.0;
    for t in 0..d {
        let slice: Vec<f64> = field.column(t).iter().copied().collect();
        total += mode_similarity(&slice, spatial_mode, weight)?;
    }
    Ok(total / d as f64)
}

/// Lag (in time units) at which the normalised trace autocorrelation
/// `tr C_i / tr C_0` first falls to `1/e`, linearly interpolated. `None` if it
/// never does within half the record.
pub fn decorrelation_time(series: &SnapshotSeries) -> Option<f64> {
    let len = series.len();
    let acf = |lag: usize| -> f64 {
        (0..len - lag)
            .map(|k| {
                series
                    .snapshot(k)
                    .iter()
                    .zip(series.snapshot(k + lag))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / (len - lag) as f64
    };
    let c0 = acf(0);
    if c0 <= 0.0 {
        return None;
    }
    let target = (-1.0f64).exp();
    let mut prev = 1.0;
    for lag in 1..len / 2 {
        let r = acf(lag) / c0;
        if r <= target {
            let frac = (prev - target) / (prev - r);
            return Some((lag as f64 - 1.0 + frac) * series.dt());
        }
        prev = r;
    }
    None
}
