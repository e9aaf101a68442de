//! Spectral POD by Welch blocking.
//!
//! The series is cut into `m_b` blocks of `n_fft` snapshots (hop
//! `n_fft (1 - overlap)`), each block is windowed and transformed with an
//! unnormalised forward DFT, and at every frequency bin the modes come from
//! the thin SVD of `(1/sqrt(m_b)) W^{1/2} Qhat_w / sqrt(n_fft sum_k w_k^2)`.
//! With that scaling the energies summed over all bins and ranks equal the
//! average windowed block power `mean_b sum_k ||w_k q_k||_W^2 / sum_k w_k^2`.
//!
//! Windows: rectangular, or periodic Hann `w_k = (1 - cos(2 pi k / n_fft)) / 2`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::decomposition::{WeightSpec, RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::timeseries::SnapshotSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn samples(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / n as f64).cos()))
                .collect(),
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Window::Rectangular => 0,
            Window::Hann => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(Error::InvalidParameter(format!("unknown window {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpodSpec {
    pub n_fft: usize,
    pub overlap: f64,
    pub window: Window,
    pub one_sided: bool,
}

impl SpodSpec {
    pub fn new(n_fft: usize) -> Self {
        Self {
            n_fft,
            overlap: 0.0,
            window: Window::Rectangular,
            one_sided: false,
        }
    }

    /// Block hop in snapshots.
    pub fn hop(&self) -> Result<usize> {
        if self.n_fft < 2 {
            return Err(Error::InvalidParameter(format!("n_fft must be >= 2, got {}", self.n_fft)));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParameter(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        let hop = (self.n_fft as f64 * (1.0 - self.overlap) + 1e-9).floor() as usize;
        if hop == 0 {
            return Err(Error::InvalidParameter("overlap leaves a block hop of zero".into()));
        }
        Ok(hop)
    }

    /// Number of Welch blocks for a series of length `len`.
    pub fn blocks_for(&self, len: usize) -> Result<usize> {
        let hop = self.hop()?;
        if len < self.n_fft {
            return Err(Error::SeriesTooShort {
                len,
                window: self.n_fft,
            });
        }
        Ok((len - self.n_fft) / hop + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBin {
    /// DFT bin index in `0..n_fft`.
    pub index: usize,
    /// Signed angular frequency `2 pi j / (n_fft dt)`, `j` folded to `(-n_fft/2, n_fft/2]`.
    pub frequency: f64,
    /// `N x r` complex modes, W-orthonormal.
    pub modes: DMatrix<Complex64>,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyModeSet {
    pub bins: Vec<FrequencyBin>,
    pub spec: SpodSpec,
    pub weight: WeightSpec,
    pub n: usize,
    pub dt: f64,
    pub n_blocks: usize,
}

impl FrequencyModeSet {
    pub fn total_energy(&self) -> f64 {
        self.bins.iter().flat_map(|b| &b.energies).sum()
    }

    /// Bin carrying the largest leading energy.
    pub fn peak_bin(&self) -> Option<&FrequencyBin> {
        self.bins
            .iter()
            .filter(|b| !b.energies.is_empty())
            .max_by(|a, b| a.energies[0].total_cmp(&b.energies[0]))
    }
}

/// Signed angular frequency of DFT bin `j` out of `n` at spacing `dt`.
pub fn bin_frequency(j: usize, n: usize, dt: f64) -> f64 {
    let signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
    std::f64::consts::TAU * signed / (n as f64 * dt)
}

pub fn spod(series: &SnapshotSeries, spec: &SpodSpec, weight: &WeightSpec) -> Result<FrequencyModeSet> {
    let n = series.dim();
    if weight.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight has dimension {}, data has N = {n}",
            weight.dim()
        )));
    }
    let n_blocks = spec.blocks_for(series.len())?;
    let hop = spec.hop()?;
    let nf = spec.n_fft;
    let win = spec.window.samples(nf);
    let win_power: f64 = win.iter().map(|w| w * w).sum();

    // transforms[b][j * n + a] = DFT of component a in block b at bin j
    let fft = FftPlanner::new().plan_fft_forward(nf);
    let transforms: Vec<Vec<Complex64>> = (0..n_blocks)
        .map(|b| {
            let mut out = vec![Complex64::new(0.0, 0.0); nf * n];
            let mut buf = vec![Complex64::new(0.0, 0.0); nf];
            for a in 0..n {
                for (k, slot) in buf.iter_mut().enumerate() {
                    *slot = Complex64::new(win[k] * series.snapshot(b * hop + k)[a], 0.0);
                }
                fft.process(&mut buf);
                for (j, v) in buf.iter().enumerate() {
                    out[j * n + a] = *v;
                }
            }
            out
        })
        .collect();

    let bin_indices: Vec<usize> = if spec.one_sided { (0..=nf / 2).collect() } else { (0..nf).collect() };
    let scale = 1.0 / (n_blocks as f64 * nf as f64 * win_power).sqrt();
    let sqrt_w: Vec<f64> = weight.as_slice().iter().map(|w| w.sqrt()).collect();
    let bins = bin_indices
        .into_par_iter()
        .map(|j| {
            let q = DMatrix::from_fn(n, n_blocks, |a, b| transforms[b][j * n + a] * (sqrt_w[a] * scale));
            let svd = SVD::new(q, true, false);
            let u = svd.u.expect("U requested");
            let fold = if spec.one_sided && j != 0 && 2 * j != nf { 2.0 } else { 1.0 };
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
            let lead = order.first().map_or(0.0, |&k| svd.singular_values[k].powi(2));
            let kept: Vec<usize> = order
                .into_iter()
                .filter(|&k| lead > 0.0 && svd.singular_values[k].powi(2) >= RANK_TOLERANCE * lead)
                .collect();
            let mut modes = DMatrix::from_element(n, kept.len(), Complex64::new(0.0, 0.0));
            for (dst, &src) in kept.iter().enumerate() {
                let mut col: Vec<Complex64> = u.column(src).iter().zip(&sqrt_w).map(|(v, s)| v / s).collect();
                orient_phase(&mut col);
                modes.column_mut(dst).copy_from_slice(&col);
            }
            FrequencyBin {
                index: j,
                frequency: bin_frequency(j, nf, series.dt()),
                modes,
                energies: kept.iter().map(|&k| fold * svd.singular_values[k].powi(2)).collect(),
            }
        })
        .collect();

    Ok(FrequencyModeSet {
        bins,
        spec: *spec,
        weight: weight.clone(),
        n,
        dt: series.dt(),
        n_blocks,
    })
}

/// Rotates `v` so its entry of largest magnitude is real and positive.
fn orient_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    if let Some(&pivot) = v.get(best) {
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            v.iter_mut().for_each(|z| *z *= rot);
            v[best] = Complex64::new(v[best].re, 0.0);
        }
    }
}

pub const STPF_MAGIC: &[u8; 4] = b"STPF";
pub const STPF_VERSION: u32 = 1;

/// `STPF` container (little-endian): `b"STPF"`, `u32` version, `u32` window
/// tag, `u32` one-sided flag, `u64` N, `u64` n_fft, `u64` blocks, `u64` bins,
/// `f64` dt, `f64` overlap, `N` weights; then per bin `u64` index, `f64`
/// frequency, `u64` r, `r` energies, `N*r` complex entries as interleaved
/// `(re, im)` column-major.
pub fn encode_stpf(set: &FrequencyModeSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(STPF_MAGIC);
    for v in [STPF_VERSION, set.spec.window.tag(), set.spec.one_sided as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [set.n, set.spec.n_fft, set.n_blocks, set.bins.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in [set.dt, set.spec.overlap].iter().chain(set.weight.as_slice()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for bin in &set.bins {
        out.extend_from_slice(&(bin.index as u64).to_le_bytes());
        out.extend_from_slice(&bin.frequency.to_le_bytes());
        out.extend_from_slice(&(bin.energies.len() as u64).to_le_bytes());
        for e in &bin.energies {
            out.extend_from_slice(&e.to_le_bytes());
        }
        for z in bin.modes.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_stpf(bytes: &[u8]) -> std::result::Result<FrequencyModeSet, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != STPF_MAGIC {
        return Err("bad magic, expected \"STPF\"".into());
    }
    let version = cur.u32()?;
    if version != STPF_VERSION {
        return Err(format!("unsupported STPF version {version}"));
    }
    let window = match cur.u32()? {
        0 => Window::Rectangular,
        1 => Window::Hann,
        t => return Err(format!("unknown window tag {t}")),
    };
    let one_sided = cur.u32()? != 0;
    let n = cur.u64()? as usize;
    let n_fft = cur.u64()? as usize;
    let n_blocks = cur.u64()? as usize;
    let n_bins = cur.u64()? as usize;
    let dt = cur.f64()?;
    let overlap = cur.f64()?;
    let weight = WeightSpec::diagonal((0..n).map(|_| cur.f64()).collect::<std::result::Result<_, _>>()?)
        .map_err(|e| e.to_string())?;
    let mut bins = Vec::with_capacity(n_bins.min(1 << 20));
    for _ in 0..n_bins {
        let index = cur.u64()? as usize;
        let frequency = cur.f64()?;
        let r = cur.u64()? as usize;
        let energies = (0..r).map(|_| cur.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
        let mut entries = Vec::with_capacity(n * r);
        for _ in 0..n * r {
            entries.push(Complex64::new(cur.f64()?, cur.f64()?));
        }
        bins.push(FrequencyBin {
            index,
            frequency,
            modes: DMatrix::from_vec(n, r, entries),
            energies,
        });
    }
    if cur.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
    }
    Ok(FrequencyModeSet {
        bins,
        spec: SpodSpec {
            n_fft,
            overlap,
            window,
            one_sided,
        },
        weight,
        n,
        dt,
        n_blocks,
    })
}

pub fn save_stpf(set: &FrequencyModeSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_stpf(set)).map_err(|e| Error::io(path, e))
}

pub fn load_stpf(path: impl AsRef<Path>) -> Result<FrequencyModeSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stpf(&bytes).map_err(|m| Error::format(path, m))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(format!("truncated file at byte {}", self.pos));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_puts_everything_in_bin_zero() {
        let c = 1.7;
        let s = SnapshotSeries::scalar(&[c; 64], 1.0).unwrap();
        let set = spod(&s, &SpodSpec::new(16), &WeightSpec::uniform(1)).unwrap();
        assert_eq!(set.n_blocks, 4);
        assert!((set.bins[0].energies[0] - c * c).abs() < 1e-12);
        for bin in &set.bins[1..] {
            assert!(bin.energies.iter().all(|e| *e < 1e-12));
        }
    }

    #[test]
    fn block_count_and_errors() {
        let mut spec = SpodSpec::new(8);
        spec.overlap = 0.5;
        assert_eq!(spec.hop().unwrap(), 4);
        assert_eq!(spec.blocks_for(20).unwrap(), 4);
        assert!(spec.blocks_for(7).is_err());
        spec.overlap = 1.0;
        assert!(spec.hop().is_err());
        assert!(SpodSpec::new(1).hop().is_err());
    }

    #[test]
    fn frequency_grid_is_signed() {
        assert_eq!(bin_frequency(0, 8, 0.5), 0.0);
        assert!((bin_frequency(1, 8, 0.5) - std::f64::consts::TAU / 4.0).abs() < 1e-15);
        assert!((bin_frequency(7, 8, 0.5) + std::f64::consts::TAU / 4.0).abs() < 1e-15);
    }

    #[test]
    fn stpf_round_trip() {
        let s = SnapshotSeries::from_snapshots(
            &(0..40).map(|k| vec![(0.4 * k as f64).sin(), (0.9 * k as f64).cos()]).collect::<Vec<_>>(),
            0.2,
        )
        .unwrap();
        let mut spec = SpodSpec::new(10);
        spec.window = Window::Hann;
        spec.one_sided = true;
        spec.overlap = 0.5;
        let set = spod(&s, &spec, &WeightSpec::diagonal(vec![1.0, 2.0]).unwrap()).unwrap();
        let bytes = encode_stpf(&set);
        assert_eq!(decode_stpf(&bytes).unwrap(), set);
        assert!(decode_stpf(&bytes[..bytes.len() - 3]).is_err());
    }
}
