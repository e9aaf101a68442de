//! Space-time correlation estimates.
//!
//! Two routes from the same series: the Hankel product `(1/m) H H^T`, whose
//! same-lag blocks differ because each averages a different stretch of the
//! record, and the ergodic estimate that averages every available product at
//! each lag (`C_i`) and lays the blocks out as a symmetric block-Toeplitz
//! matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::embedding::DataMatrix;
use crate::error::{Error, Result};
use crate::timeseries::SnapshotSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    HankelProduct,
    BlockToeplitz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeCorrelation {
    pub values: DMatrix<f64>,
    pub kind: CorrelationKind,
    pub n: usize,
    pub d: usize,
    pub dt: f64,
}

impl SpaceTimeCorrelation {
    /// The `N x N` block at block-row `i`, block-column `j`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.values.view((i * self.n, j * self.n), (self.n, self.n)).into_owned()
    }

    /// For each lag `0..d`, the largest entrywise spread (max - min) across
    /// all blocks `(i, i + lag)` on that block diagonal.
    ///
    /// Zero at every lag for a block-Toeplitz matrix.
    pub fn same_lag_spread(&self) -> Vec<f64> {
        let n = self.n;
        (0..self.d)
            .map(|lag| {
                let mut spread = 0.0f64;
                for a in 0..n {
                    for b in 0..n {
                        let (lo, hi) = (0..self.d - lag)
                            .map(|i| self.values[(i * n + a, (i + lag) * n + b)])
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                        spread = spread.max(hi - lo);
                    }
                }
                spread
            })
            .collect()
    }
}

/// `(1/m) Y Y^T` for a data matrix of `m` realizations.
pub fn hankel_correlation(data: &DataMatrix) -> SpaceTimeCorrelation {
    let h = data.values();
    let m = h.ncols() as f64;
    let mut c = h * h.transpose();
    c /= m;
    // mirror the upper triangle so the result is exactly symmetric
    for j in 0..c.ncols() {
        for i in j + 1..c.nrows() {
            c[(i, j)] = c[(j, i)];
        }
    }
    SpaceTimeCorrelation {
        values: c,
        kind: CorrelationKind::HankelProduct,
        n: data.dim(),
        d: data.embedding().d,
        dt: data.dt(),
    }
}

/// Lag-correlation blocks `C_0 .. C_{d-1}` of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCorrelationSet {
    blocks: Vec<DMatrix<f64>>,
    counts: Vec<usize>,
    n: usize,
    dt: f64,
}

impl LagCorrelationSet {
    /// Wraps externally supplied blocks; `counts[i]` is the number of products
    /// averaged into block `i`.
    pub fn from_blocks(blocks: Vec<DMatrix<f64>>, counts: Vec<usize>, dt: f64) -> Result<Self> {
        let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
        if n == 0 || blocks.iter().any(|b| b.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("lag blocks must be nonempty, square and equal-sized".into()));
        }
        if counts.len() != blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {} blocks",
                counts.len(),
                blocks.len()
            )));
        }
        Ok(Self { blocks, counts, n, dt })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn d(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `y = C~ x` without forming the `(N d) x (N d)` matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let d = self.d();
        debug_assert_eq!(x.len(), n * d);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            let yi = &mut y[i * n..(i + 1) * n];
            for j in 0..d {
                let xj = &x[j * n..(j + 1) * n];
                if j >= i {
                    let c = &self.blocks[j - i];
                    for (b, &xv) in xj.iter().enumerate() {
                        for (a, yv) in yi.iter_mut().enumerate() {
                            *yv += c[(a, b)] * xv;
                        }
                    }
                } else {
                    let c = &self.blocks[i - j];
                    for (a, yv) in yi.iter_mut().enumerate() {
                        *yv += (0..n).map(|b| c[(b, a)] * xj[b]).sum::<f64>();
                    }
                }
            }
        }
    }
}

/// `C_i = 1/(L - i) sum_{k=0}^{L-1-i} q_k q_{k+i}^T` for `i = 0..d`.
///
/// Every lag uses all `L - i` products available in the record. Sums run in
/// ascending `k`, so results do not depend on the thread count.
pub fn lag_correlations(series: &SnapshotSeries, d: usize) -> Result<LagCorrelationSet> {
    let len = series.len();
    if d == 0 {
        return Err(Error::InvalidParameter("embedding depth d must be >= 1".into()));
    }
    if len < d {
        return Err(Error::SeriesTooShort { len, window: d });
    }
    let n = series.dim();
    let blocks: Vec<DMatrix<f64>> = (0..d)
        .into_par_iter()
        .map(|lag| {
            let mut acc = vec![0.0; n * n];
            for k in 0..len - lag {
                let x = series.snapshot(k);
                let y = series.snapshot(k + lag);
                for (b, &yb) in y.iter().enumerate() {
                    let col = &mut acc[b * n..(b + 1) * n];
                    for (a, &xa) in x.iter().enumerate() {
                        col[a] += xa * yb;
                    }
                }
            }
            let scale = (len - lag) as f64;
            acc.iter_mut().for_each(|v| *v /= scale);
            DMatrix::from_vec(n, n, acc)
        })
        .collect();
    let counts = (0..d).map(|lag| len - lag).collect();
    Ok(LagCorrelationSet {
        blocks,
        counts,
        n,
        dt: series.dt(),
    })
}

/// Lays out `block(i, j) = C_{j-i}` for `j >= i` and `C_{i-j}^T` otherwise.
pub fn assemble_block_toeplitz(lags: &LagCorrelationSet) -> SpaceTimeCorrelation {
    let n = lags.n;
    let d = lags.d();
    let mut c = DMatrix::zeros(n * d, n * d);
    for i in 0..d {
        for j in 0..d {
            let mut view = c.view_mut((i * n, j * n), (n, n));
            if j >= i {
                view.copy_from(&lags.blocks[j - i]);
            } else {
                view.copy_from(&lags.blocks[i - j].transpose());
            }
        }
    }
    SpaceTimeCorrelation {
        values: c,
        kind: CorrelationKind::BlockToeplitz,
        n,
        d,
        dt: lags.dt,
    }
}
