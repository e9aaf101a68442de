//! POD engines.
//!
//! Every method reduces to one of two routes:
//!
//! * SVD route: thin SVD of `(1/sqrt(m)) W^{1/2} Y = U S V^T`, giving modes
//!   `Phi = W^{-1/2} U` and energies `Lambda = S^2`. Used for space-only POD
//!   (`Y` = snapshot matrix), Hankel and spaced-column space-time POD.
//! * Eigen route: symmetric eigendecomposition of `W^{1/2} C W^{1/2}` for an
//!   explicitly estimated correlation `C` (block-Toeplitz path).
//!
//! The dense SVD kernel is nalgebra's Golub-Kahan bidiagonalisation followed
//! by implicit-shift QR. The bidiagonal form is taken in the matrix's native
//! orientation (upper for tall, lower for wide), so the cost is linear in the
//! larger dimension and quadratic in the smaller one. Only `U` is formed.
//!
//! Output conventions applied to every `ModeSet`:
//! * energies sorted nonincreasing; modes with `lambda < 1e-12 lambda_1` dropped;
//! * in each mode the entry of largest magnitude is positive;
//! * within a group of energies equal to `1e-10` relative, modes are ordered
//!   lexicographically (descending) by their entries.

pub mod io;
mod iterative;

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::correlation::{assemble_block_toeplitz, lag_correlations, LagCorrelationSet};
use crate::embedding::{build_embedded, DataMatrix, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::timeseries::SnapshotSeries;

/// Relative energy floor below which modes are discarded.
pub const RANK_TOLERANCE: f64 = 1e-12;
/// Relative width of an energy cluster treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
/// Negative eigenvalues below `-NEGATIVE_TOLERANCE * trace` are reported.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Positive diagonal spatial weight. The space-time weight is its `d`-fold repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    diagonal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Uniform,
    Diagonal,
}

impl WeightSpec {
    pub fn uniform(n: usize) -> Self {
        Self {
            diagonal: vec![1.0; n],
        }
    }

    pub fn diagonal(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::InvalidParameter("weight vector is empty".into()));
        }
        if let Some(v) = diagonal.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("weights must be positive and finite, got {v}")));
        }
        Ok(Self { diagonal })
    }

    pub fn kind(&self) -> WeightKind {
        if self.diagonal.iter().all(|&w| w == 1.0) {
            WeightKind::Uniform
        } else {
            WeightKind::Diagonal
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.kind() == WeightKind::Uniform
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diagonal
    }

    /// Spatial dimension `N`.
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// The weight repeated to cover a vector of length `len` (a multiple of `N`).
    pub fn expanded(&self, len: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        if len == 0 || len % n != 0 {
            return Err(Error::DimensionMismatch(format!(
                "weight of dimension {n} does not tile a vector of length {len}"
            )));
        }
        Ok(self.diagonal.iter().copied().cycle().take(len).collect())
    }

    /// `<a, b>_W` for vectors whose length is a multiple of `N`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .zip(self.diagonal.iter().cycle())
            .map(|((x, y), w)| w * x * y)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SpaceOnly,
    Hankel,
    Spaced,
    Toeplitz,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SpaceOnly => "space-only",
            Method::Hankel => "hankel",
            Method::Spaced => "spaced",
            Method::Toeplitz => "toeplitz",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Method::SpaceOnly => 0,
            Method::Hankel => 1,
            Method::Spaced => 2,
            Method::Toeplitz => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => Method::SpaceOnly,
            1 => Method::Hankel,
            2 => Method::Spaced,
            3 => Method::Toeplitz,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "space-only" => Method::SpaceOnly,
            "hankel" => Method::Hankel,
            "spaced" => Method::Spaced,
            "toeplitz" => Method::Toeplitz,
            other => return Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        })
    }
}

/// Counts of eigen/singular values removed or altered while forming a `ModeSet`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeDiagnostics {
    /// Modes dropped because `lambda < 1e-12 lambda_1` (includes clamped negatives).
    pub dropped: usize,
    /// Eigenvalues below `-1e-10 * trace` (a sign the correlation estimate is indefinite).
    pub significant_negative: usize,
    /// Most negative raw eigenvalue seen (0 if none).
    pub min_eigenvalue: f64,
}

/// Ordered modes `Phi` (columns) and energies `Lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: DMatrix<f64>,
    pub energies: Vec<f64>,
    pub method: Method,
    /// `None` for space-only POD.
    pub embedding: Option<EmbeddingSpec>,
    pub n: usize,
    pub dt: f64,
    pub weight: WeightSpec,
    pub m_used: usize,
    pub diagnostics: ModeDiagnostics,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Embedding depth (1 for space-only POD).
    pub fn d(&self) -> usize {
        self.embedding.map_or(1, |e| e.d)
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        let rows = self.modes.nrows();
        &self.modes.as_slice()[k * rows..(k + 1) * rows]
    }

    /// Window `T = (d - 1) dt` the modes are defined on.
    pub fn window(&self) -> f64 {
        (self.d() - 1) as f64 * self.dt
    }

    /// Keeps the leading `r` modes.
    pub fn truncated(mut self, r: usize) -> Self {
        let r = r.min(self.len());
        self.modes = self.modes.columns(0, r).into_owned();
        self.energies.truncate(r);
        self
    }

    /// Largest deviation of `Phi^T W Phi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g = self.weight.inner(self.mode(i), self.mode(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Modes from the thin SVD of the weighted data matrix.
///
/// The method is `hankel` for `s = 1` and `spaced` otherwise. With a uniform
/// weight the modes are exactly the left singular vectors of
/// `(1/sqrt(m)) Y` (only the sign convention is applied).
pub fn weighted_svd_modes(data: &DataMatrix, weight: &WeightSpec) -> Result<ModeSet> {
    let method = if data.embedding().s == 1 {
        Method::Hankel
    } else {
        Method::Spaced
    };
    svd_modes(data, weight, method, Some(data.embedding()))
}

fn svd_modes(
    data: &DataMatrix,
    weight: &WeightSpec,
    method: Method,
    embedding: Option<EmbeddingSpec>,
) -> Result<ModeSet> {
    let y = data.values();
    if weight.dim() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight has dimension {}, data has N = {}",
            weight.dim(),
            data.dim()
        )));
    }
    let m = y.ncols();
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    let uniform = weight.is_uniform();
    let w = weight.expanded(y.nrows())?;
    let scaled = if uniform {
        y * inv_sqrt_m
    } else {
        let mut s = y * inv_sqrt_m;
        for (mut row, wi) in s.row_iter_mut().zip(&w) {
            row *= wi.sqrt();
        }
        s
    };
    let svd = SVD::new(scaled, true, false);
    let u = svd.u.expect("U requested");
    let energies: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    finalize(u, energies, &w, uniform, 0.0, 0).map(|(modes, energies, diagnostics)| ModeSet {
        modes,
        energies,
        method,
        embedding,
        n: data.dim(),
        dt: data.dt(),
        weight: weight.clone(),
        m_used: m,
        diagnostics,
    })
}

/// Space-only POD: weighted SVD of the raw `N x L` snapshot matrix (`m = L`).
pub fn space_only_pod(series: &SnapshotSeries, weight: &WeightSpec) -> Result<ModeSet> {
    let data = build_embedded(series, 1, 1)?;
    svd_modes(&data, weight, Method::SpaceOnly, None)
}

/// Space-time POD from the Hankel (`s = 1`) or spaced-column data matrix.
pub fn spacetime_pod(series: &SnapshotSeries, d: usize, s: usize, weight: &WeightSpec) -> Result<ModeSet> {
    let data = build_embedded(series, d, s)?;
    weighted_svd_modes(&data, weight)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToeplitzOptions {
    /// Largest `N d` solved with the dense symmetric eigensolver.
    pub dense_limit: usize,
    /// Residual target `||C~ W phi - lambda phi|| <= tol * lambda_1` for the iterative solver.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ToeplitzOptions {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            residual_tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

/// Space-time POD from the block-Toeplitz ergodic correlation estimate,
/// returning the leading `r` modes.
pub fn spacetime_pod_toeplitz(series: &SnapshotSeries, d: usize, weight: &WeightSpec, r: usize) -> Result<ModeSet> {
    spacetime_pod_toeplitz_with(series, d, weight, r, &ToeplitzOptions::default())
}

pub fn spacetime_pod_toeplitz_with(
    series: &SnapshotSeries,
    d: usize,
    weight: &WeightSpec,
    r: usize,
    options: &ToeplitzOptions,
) -> Result<ModeSet> {
    let lags = lag_correlations(series, d)?;
    toeplitz_modes(&lags, weight, r, options)
}

/// Modes of a given lag-correlation set (`C~ W Phi = Phi Lambda`).
pub fn toeplitz_modes(
    lags: &LagCorrelationSet,
    weight: &WeightSpec,
    r: usize,
    options: &ToeplitzOptions,
) -> Result<ModeSet> {
    let n = lags.dim();
    let d = lags.d();
    let size = n * d;
    if weight.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight has dimension {}, data has N = {n}",
            weight.dim()
        )));
    }
    if r == 0 || r > size {
        return Err(Error::InvalidParameter(format!("requested {r} modes, need 1 <= r <= N d = {size}")));
    }
    let uniform = weight.is_uniform();
    let w = weight.expanded(size)?;
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let trace = d as f64 * (0..n).map(|a| w[a] * lags.blocks()[0][(a, a)]).sum::<f64>();

    let (vectors, values) = if size <= options.dense_limit {
        let c = assemble_block_toeplitz(lags).values;
        let a = if uniform {
            c
        } else {
            DMatrix::from_fn(size, size, |i, j| sqrt_w[i] * c[(i, j)] * sqrt_w[j])
        };
        let eig = SymmetricEigen::new(a);
        (eig.eigenvectors, eig.eigenvalues.as_slice().to_vec())
    } else {
        let op = |x: &[f64], y: &mut [f64]| {
            if uniform {
                lags.apply(x, y);
            } else {
                let xs: Vec<f64> = x.iter().zip(&sqrt_w).map(|(v, s)| v * s).collect();
                lags.apply(&xs, y);
                y.iter_mut().zip(&sqrt_w).for_each(|(v, s)| *v *= s);
            }
        };
        iterative::top_eigenpairs(size, r, op, options.residual_tolerance, options.max_iterations)?
    };

    let significant_negative = values.iter().filter(|&&v| v < -NEGATIVE_TOLERANCE * trace.abs()).count();
    let min_eigenvalue = values.iter().copied().fold(0.0f64, f64::min);
    let (mut modes, mut energies, diagnostics) =
        finalize(vectors, values, &w, uniform, min_eigenvalue, significant_negative)?;
    if energies.len() > r {
        energies.truncate(r);
        modes = modes.columns(0, r).into_owned();
    }
    Ok(ModeSet {
        modes,
        energies,
        method: Method::Toeplitz,
        embedding: Some(EmbeddingSpec::new(d, 1, lags.dt())?),
        n,
        dt: lags.dt(),
        weight: weight.clone(),
        m_used: lags.counts().first().map_or(0, |&l| l + 1 - d),
        diagnostics,
    })
}

/// Sorts, truncates, un-weights and orients raw eigen/singular vectors.
fn finalize(
    vectors: DMatrix<f64>,
    values: Vec<f64>,
    w: &[f64],
    uniform: bool,
    min_eigenvalue: f64,
    significant_negative: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, ModeDiagnostics)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let lead = values.get(order.first().copied().unwrap_or(0)).copied().unwrap_or(0.0);
    if !(lead > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| values[k] >= RANK_TOLERANCE * lead)
        .collect();
    let rows = vectors.nrows();
    let mut modes = DMatrix::zeros(rows, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        let mut col = modes.column_mut(dst);
        col.copy_from(&vectors.column(src));
        if !uniform {
            for (v, wi) in col.iter_mut().zip(w) {
                *v /= wi.sqrt();
            }
        }
        orient(col.as_mut_slice());
    }
    let energies: Vec<f64> = kept.iter().map(|&k| values[k]).collect();
    order_degenerate(&mut modes, &energies);
    let diagnostics = ModeDiagnostics {
        dropped: values.len() - kept.len(),
        significant_negative,
        min_eigenvalue,
    };
    Ok((modes, energies, diagnostics))
}

/// Flips `v` so that its entry of largest magnitude (first on ties) is positive.
pub(crate) fn orient(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn order_degenerate(modes: &mut DMatrix<f64>, energies: &[f64]) {
    let mut start = 0;
    while start < energies.len() {
        let mut end = start + 1;
        while end < energies.len() && energies[end - 1] - energies[end] <= DEGENERACY_TOLERANCE * energies[end - 1] {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<Vec<f64>> = (start..end).map(|k| modes.column(k).iter().copied().collect()).collect();
            cols.sort_by(|a, b| {
                b.iter()
                    .zip(a)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            for (k, col) in (start..end).zip(cols) {
                modes.column_mut(k).copy_from_slice(&col);
            }
        }
        start = end;
    }
}
