//! Uniformly sampled vector time series: data model, file formats and
//! synthetic stationary generators.

mod generate;
pub mod io;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use generate::{derive_seed, generate, GeneratorKind, GeneratorSpec, OuModel};
pub use io::{load, save, SeriesFormat};

/// Snapshots `q_1..q_L` of an `N`-dimensional state on a uniform time grid.
///
/// Column `k` of `values` is snapshot `q_{k+1}`. Storage is column-major, so
/// consecutive snapshots are contiguous in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    values: DMatrix<f64>,
    dt: f64,
    labels: Option<Vec<String>>,
}

impl SnapshotSeries {
    pub fn new(values: DMatrix<f64>, dt: f64) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidParameter("series needs N >= 1 components".into()));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidParameter("no snapshots".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            let n = values.nrows();
            return Err(Error::NonFinite {
                component: idx % n,
                snapshot: idx / n,
            });
        }
        Ok(Self {
            values,
            dt,
            labels: None,
        })
    }

    /// Builds a series from a list of snapshots, each of length `N`.
    pub fn from_snapshots(snapshots: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n = snapshots.first().map(Vec::len).unwrap_or(0);
        if let Some((k, s)) = snapshots.iter().enumerate().find(|(_, s)| s.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "snapshot {k} has {} components, expected {n}",
                s.len()
            )));
        }
        let flat: Vec<f64> = snapshots.iter().flatten().copied().collect();
        Self::new(DMatrix::from_column_slice(n, snapshots.len(), &flat), dt)
    }

    /// Scalar series from a slice of samples.
    pub fn scalar(samples: &[f64], dt: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, samples.len(), samples), dt)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} components",
                labels.len(),
                self.dim()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Spatial dimension `N`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of snapshots `L`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Snapshot `k` (zero-based) as a contiguous slice of length `N`.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.values.as_slice()[k * n..(k + 1) * n]
    }

    /// Contiguous run of snapshots `start..start + count`, flattened.
    pub fn window(&self, start: usize, count: usize) -> &[f64] {
        let n = self.dim();
        &self.values.as_slice()[start * n..(start + count) * n]
    }

    /// First `len` snapshots as a new series.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a series of length {} to {len}",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values.columns(0, len).into_owned(),
            dt: self.dt,
            labels: self.labels.clone(),
        })
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Removes the temporal mean of every component.
///
/// Decompositions never do this implicitly; it is an explicit preprocessing step.
pub fn subtract_temporal_mean(series: &SnapshotSeries) -> (SnapshotSeries, DVector<f64>) {
    let l = series.len() as f64;
    let mean = DVector::from_iterator(
        series.dim(),
        series.values.row_iter().map(|row| row.iter().sum::<f64>() / l),
    );
    let mut values = series.values.clone();
    for mut col in values.column_iter_mut() {
        col -= &mean;
    }
    let out = SnapshotSeries {
        values,
        dt: series.dt,
        labels: series.labels.clone(),
    };
    (out, mean)
}
