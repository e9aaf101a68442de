//! Python bindings for `stpod_core`.
//!
//! Matrices cross the boundary as lists: a series as a list of snapshots,
//! modes as a list of mode vectors.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stpod_core::analysis;
use stpod_core::decomposition::{self, WeightSpec};
use stpod_core::spod::{SpodSpec, Window};
use stpod_core::timeseries::{self, GeneratorSpec, SeriesFormat};
use stpod_core::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn weight_for(weight: Option<Vec<f64>>, n: usize) -> PyResult<WeightSpec> {
    match weight {
        Some(w) => WeightSpec::diagonal(w).map_err(to_py),
        None => Ok(WeightSpec::uniform(n)),
    }
}

#[pyclass(module = "stpod", skip_from_py_object)]
#[derive(Clone)]
pub struct Series {
    inner: timeseries::SnapshotSeries,
}

#[pymethods]
impl Series {
    #[new]
    fn new(snapshots: Vec<Vec<f64>>, dt: f64) -> PyResult<Self> {
        let inner = timeseries::SnapshotSeries::from_snapshots(&snapshots, dt).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn scalar(samples: Vec<f64>, dt: f64) -> PyResult<Self> {
        let inner = timeseries::SnapshotSeries::scalar(&samples, dt).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = timeseries::load(path, SeriesFormat::from_path(path.as_ref())).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        timeseries::save(&self.inner, path, SeriesFormat::from_path(path.as_ref())).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn snapshot(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.inner.len() {
            return Err(PyValueError::new_err(format!("snapshot {k} out of range")));
        }
        Ok(self.inner.snapshot(k).to_vec())
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|k| self.inner.snapshot(k).to_vec()).collect()
    }

    /// Returns the mean-subtracted series and the removed mean.
    fn subtract_mean(&self) -> (Series, Vec<f64>) {
        let (s, mean) = timeseries::subtract_temporal_mean(&self.inner);
        (Series { inner: s }, mean.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Series(N={}, L={}, dt={})", self.inner.dim(), self.inner.len(), self.inner.dt())
    }
}

#[pyclass(module = "stpod", skip_from_py_object)]
#[derive(Clone)]
pub struct ModeSet {
    inner: decomposition::ModeSet,
}

#[pymethods]
impl ModeSet {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: decomposition::io::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        decomposition::io::save(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn window(&self) -> f64 {
        self.inner.window()
    }

    #[getter]
    fn m_used(&self) -> usize {
        self.inner.m_used
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn mode(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.inner.len() {
            return Err(PyValueError::new_err(format!("mode {k} out of range")));
        }
        Ok(self.inner.mode(k).to_vec())
    }

    fn modes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|k| self.inner.mode(k).to_vec()).collect()
    }

    fn orthonormality_defect(&self) -> f64 {
        self.inner.orthonormality_defect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModeSet(method={}, N={}, d={}, r={})",
            self.inner.method.name(),
            self.inner.n,
            self.inner.d(),
            self.inner.len()
        )
    }
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn run_generator(spec: GeneratorSpec, n: usize, dt: f64) -> PyResult<Series> {
    Ok(Series {
        inner: timeseries::generate(&spec, n, dt).map_err(to_py)?,
    })
}

#[pyfunction]
#[pyo3(signature = (drift, diffusion, n, dt, seed=0))]
fn generate_ou(drift: Vec<Vec<f64>>, diffusion: Vec<Vec<f64>>, n: usize, dt: f64, seed: u64) -> PyResult<Series> {
    let spec = GeneratorSpec::ou(matrix(drift, "drift")?, matrix(diffusion, "diffusion")?, seed);
    run_generator(spec, n, dt)
}

#[pyfunction]
#[pyo3(signature = (tau, n, dt, seed=0))]
fn generate_scalar_ou(tau: f64, n: usize, dt: f64, seed: u64) -> PyResult<Series> {
    run_generator(GeneratorSpec::scalar_ou(tau, seed), n, dt)
}

#[pyfunction]
#[pyo3(signature = (omega0, amplitude, n, dt, bandwidth=0.0, noise=0.0, seed=0))]
fn generate_narrowband(
    omega0: f64,
    amplitude: Vec<f64>,
    n: usize,
    dt: f64,
    bandwidth: f64,
    noise: f64,
    seed: u64,
) -> PyResult<Series> {
    run_generator(GeneratorSpec::narrowband(omega0, bandwidth, amplitude, noise, seed), n, dt)
}

#[pyfunction]
#[pyo3(signature = (n, dt, seed=0))]
fn generate_lorenz63(n: usize, dt: f64, seed: u64) -> PyResult<Series> {
    run_generator(GeneratorSpec::lorenz63(seed), n, dt)
}

#[pyfunction]
#[pyo3(signature = (series, weight=None))]
fn space_only_pod(series: &Series, weight: Option<Vec<f64>>) -> PyResult<ModeSet> {
    let w = weight_for(weight, series.inner.dim())?;
    let inner = decomposition::space_only_pod(&series.inner, &w).map_err(to_py)?;
    Ok(ModeSet { inner })
}

#[pyfunction]
#[pyo3(signature = (series, d, s=1, weight=None))]
fn spacetime_pod(series: &Series, d: usize, s: usize, weight: Option<Vec<f64>>) -> PyResult<ModeSet> {
    let w = weight_for(weight, series.inner.dim())?;
    let inner = decomposition::spacetime_pod(&series.inner, d, s, &w).map_err(to_py)?;
    Ok(ModeSet { inner })
}

#[pyfunction]
#[pyo3(signature = (series, d, r, weight=None))]
fn toeplitz_pod(series: &Series, d: usize, r: usize, weight: Option<Vec<f64>>) -> PyResult<ModeSet> {
    let w = weight_for(weight, series.inner.dim())?;
    let inner = decomposition::spacetime_pod_toeplitz(&series.inner, d, &w, r).map_err(to_py)?;
    Ok(ModeSet { inner })
}

/// Returns `(frequencies, energies)` with one energy list per bin.
#[pyfunction]
#[pyo3(signature = (series, n_fft, overlap=0.0, window="rectangular", one_sided=false, weight=None))]
fn spod(
    series: &Series,
    n_fft: usize,
    overlap: f64,
    window: &str,
    one_sided: bool,
    weight: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let w = weight_for(weight, series.inner.dim())?;
    let spec = SpodSpec {
        n_fft,
        overlap,
        window: window.parse::<Window>().map_err(to_py)?,
        one_sided,
    };
    let set = stpod_core::spod::spod(&series.inner, &spec, &w).map_err(to_py)?;
    Ok((
        set.bins.iter().map(|b| b.frequency).collect(),
        set.bins.iter().map(|b| b.energies.clone()).collect(),
    ))
}

#[pyfunction]
#[pyo3(signature = (a, b, weight=None))]
fn mode_similarity(a: Vec<f64>, b: Vec<f64>, weight: Option<Vec<f64>>) -> PyResult<f64> {
    let w = weight_for(weight, 1)?;
    analysis::mode_similarity(&a, &b, &w).map_err(to_py)
}

#[pyfunction]
fn captured_energy(mode: Vec<f64>, reference: &ModeSet) -> PyResult<f64> {
    analysis::captured_energy(&mode, &reference.inner).map_err(to_py)
}

/// Returns `(frequencies, power)` of a space-time mode.
#[pyfunction]
#[pyo3(signature = (mode, n, d, dt, weight=None))]
fn mode_psd(mode: Vec<f64>, n: usize, d: usize, dt: f64, weight: Option<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let w = weight_for(weight, n)?;
    let psd = analysis::mode_psd(&mode, n, d, dt, &w).map_err(to_py)?;
    Ok((psd.frequencies, psd.power))
}

#[pyfunction]
fn decorrelation_time(series: &Series) -> Option<f64> {
    analysis::decorrelation_time(&series.inner)
}

#[pymodule]
fn stpod(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Series>()?;
    m.add_class::<ModeSet>()?;
    m.add_function(wrap_pyfunction!(generate_ou, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scalar_ou, m)?)?;
    m.add_function(wrap_pyfunction!(generate_narrowband, m)?)?;
    m.add_function(wrap_pyfunction!(generate_lorenz63, m)?)?;
    m.add_function(wrap_pyfunction!(space_only_pod, m)?)?;
    m.add_function(wrap_pyfunction!(spacetime_pod, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz_pod, m)?)?;
    m.add_function(wrap_pyfunction!(spod, m)?)?;
    m.add_function(wrap_pyfunction!(mode_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(captured_energy, m)?)?;
    m.add_function(wrap_pyfunction!(mode_psd, m)?)?;
    m.add_function(wrap_pyfunction!(decorrelation_time, m)?)?;
    Ok(())
}
