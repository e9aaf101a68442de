//! Delay-embedded data matrices: the block Hankel matrix (`s = 1`) and its
//! column-spaced variant.
//!
//! Column `j` stacks the `d` consecutive snapshots `q_{js} .. q_{js+d-1}`
//! (zero-based), so every column is one temporal realization of length
//! `T = (d - 1) dt`. Snapshots left over at the end of the series when
//! `(L - d)` is not a multiple of `s` are dropped.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::timeseries::SnapshotSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingSpec {
    /// Snapshots stacked per column.
    pub d: usize,
    /// Stride in snapshots between successive columns.
    pub s: usize,
    pub dt: f64,
}

impl EmbeddingSpec {
    pub fn new(d: usize, s: usize, dt: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("embedding depth d must be >= 1".into()));
        }
        if s == 0 {
            return Err(Error::InvalidParameter("column spacing s must be >= 1".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { d, s, dt })
    }

    /// Time window spanned by one column, `(d - 1) dt`.
    pub fn window(&self) -> f64 {
        (self.d - 1) as f64 * self.dt
    }

    /// Number of columns obtainable from a series of length `len`.
    pub fn columns_for(&self, len: usize) -> Option<usize> {
        (len >= self.d).then(|| (len - self.d) / self.s + 1)
    }

    /// Shortest series that yields `m` columns.
    pub fn length_for(&self, m: usize) -> usize {
        (m.max(1) - 1) * self.s + self.d
    }
}

/// `(N d) x m` matrix of stacked realizations with its embedding metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    embedding: EmbeddingSpec,
    n: usize,
}

impl DataMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn embedding(&self) -> EmbeddingSpec {
        self.embedding
    }

    /// Spatial dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.embedding.dt
    }

    /// Number of realizations (columns) `m`.
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

pub fn build_embedded(series: &SnapshotSeries, d: usize, s: usize) -> Result<DataMatrix> {
    let embedding = EmbeddingSpec::new(d, s, series.dt())?;
    let m = embedding.columns_for(series.len()).ok_or(Error::SeriesTooShort {
        len: series.len(),
        window: d,
    })?;
    let n = series.dim();
    let rows = n * d;
    // Each column is a contiguous run of the column-major series storage.
    let mut data = Vec::with_capacity(rows * m);
    for j in 0..m {
        data.extend_from_slice(series.window(j * s, d));
    }
    Ok(DataMatrix {
        values: DMatrix::from_vec(rows, m, data),
        embedding,
        n,
    })
}

/// Reshapes a stacked space-time mode of length `N d` into an `N x d` field
/// whose column `t` is the spatial slice at time index `t`.
pub fn reshape_mode(mode: &[f64], n: usize, d: usize) -> Result<DMatrix<f64>> {
    if n == 0 || d == 0 || mode.len() != n * d {
        return Err(Error::DimensionMismatch(format!(
            "mode of length {} cannot be reshaped to {n} x {d}",
            mode.len()
        )));
    }
    Ok(DMatrix::from_column_slice(n, d, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64]) -> SnapshotSeries {
        SnapshotSeries::scalar(v, 1.0).unwrap()
    }

    #[test]
    fn scalar_hankel() {
        let h = build_embedded(&scalar(&[1., 2., 3., 4., 5.]), 2, 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[1., 2., 3., 4., 2., 3., 4., 5.]);
        assert_eq!(h.values(), &expected);
    }

    #[test]
    fn scalar_spaced() {
        let q = build_embedded(&scalar(&[1., 2., 3., 4., 5.]), 2, 2).unwrap();
        let expected = DMatrix::from_column_slice(2, 2, &[1., 2., 3., 4.]);
        assert_eq!(q.values(), &expected);
    }

    #[test]
    fn vector_hankel() {
        let s = SnapshotSeries::from_snapshots(&[vec![1., 0.], vec![0., 1.], vec![1., 1.]], 1.0).unwrap();
        let h = build_embedded(&s, 2, 1).unwrap();
        let expected = DMatrix::from_column_slice(4, 2, &[1., 0., 0., 1., 0., 1., 1., 1.]);
        assert_eq!(h.values(), &expected);
    }

    #[test]
    fn too_short_series() {
        let err = build_embedded(&scalar(&[1., 2.]), 3, 1).unwrap_err();
        assert!(err.to_string().contains("series shorter than embedding window"));
    }

    #[test]
    fn window_metadata() {
        let s = SnapshotSeries::scalar(&[0.0; 40], 0.1).unwrap();
        let h = build_embedded(&s, 21, 3).unwrap();
        assert!((h.embedding().window() - 2.0).abs() < 1e-12);
        assert_eq!(h.ncols(), (40 - 21) / 3 + 1);
        assert_eq!(h.embedding().length_for(h.ncols()), 40 - (40 - 21) % 3);
    }

    #[test]
    fn reshape_examples() {
        let f = reshape_mode(&[1., 2., 3., 4.], 2, 2).unwrap();
        assert_eq!(f.column(0).as_slice(), &[1., 2.]);
        assert_eq!(f.column(1).as_slice(), &[3., 4.]);
        assert_eq!(f.as_slice(), &[1., 2., 3., 4.]);
        let row = reshape_mode(&[5., 6., 7.], 1, 3).unwrap();
        assert_eq!(row.shape(), (1, 3));
        assert_eq!(row.row(0).iter().copied().collect::<Vec<_>>(), vec![5., 6., 7.]);
        assert!(reshape_mode(&[1., 2., 3.], 2, 2).is_err());
    }
}
