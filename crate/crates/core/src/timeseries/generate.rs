//! Synthetic statistically stationary generators.
//!
//! All randomness comes from a ChaCha20 stream (`rand_chacha::ChaCha20Rng`,
//! seeded with `seed_from_u64`) and standard normals from `rand_distr`'s
//! ziggurat sampler, so a seed reproduces the same series on every platform.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::SnapshotSeries;
use crate::error::{Error, Result};

/// Mixes a base seed with two indices (splitmix64 finaliser on each step).
///
/// Used to give every (cell, trial) pair of a study its own stream.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ a) ^ b.rotate_left(32))
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// `dx = A x dt + B dW`, sampled with the exact discrete recursion.
    OrnsteinUhlenbeck {
        drift: DMatrix<f64>,
        diffusion: DMatrix<f64>,
    },
    /// `q_k = a Re(z_k) + b Im(z_k) + noise * xi_k` where `z` is a complex
    /// OU oscillator with carrier `omega0` [rad/time] and damping `bandwidth`
    /// [1/time]. Zero bandwidth gives a pure sinusoid with a seeded phase.
    Narrowband {
        omega0: f64,
        bandwidth: f64,
        amplitude: Vec<f64>,
        quadrature: Vec<f64>,
        noise: f64,
    },
    Lorenz63 {
        sigma: f64,
        rho: f64,
        beta: f64,
        observed: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub seed: u64,
    pub burn_in: usize,
}

impl GeneratorSpec {
    /// Scalar OU process with correlation time `tau` and unit stationary variance.
    pub fn scalar_ou(tau: f64, seed: u64) -> Self {
        Self::ou(
            DMatrix::from_element(1, 1, -1.0 / tau),
            DMatrix::from_element(1, 1, (2.0 / tau).sqrt()),
            seed,
        )
    }

    pub fn ou(drift: DMatrix<f64>, diffusion: DMatrix<f64>, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::OrnsteinUhlenbeck { drift, diffusion },
            seed,
            burn_in: 0,
        }
    }

    pub fn narrowband(omega0: f64, bandwidth: f64, amplitude: Vec<f64>, noise: f64, seed: u64) -> Self {
        let quadrature = vec![0.0; amplitude.len()];
        Self {
            kind: GeneratorKind::Narrowband {
                omega0,
                bandwidth,
                amplitude,
                quadrature,
                noise,
            },
            seed,
            burn_in: 0,
        }
    }

    pub fn lorenz63(seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Lorenz63 {
                sigma: 10.0,
                rho: 28.0,
                beta: 8.0 / 3.0,
                observed: vec![0, 1, 2],
            },
            seed,
            burn_in: 1000,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Output dimension `N`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::OrnsteinUhlenbeck { drift, .. } => drift.nrows(),
            GeneratorKind::Narrowband { amplitude, .. } => amplitude.len(),
            GeneratorKind::Lorenz63 { observed, .. } => observed.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            GeneratorKind::OrnsteinUhlenbeck { .. } => "ou",
            GeneratorKind::Narrowband { .. } => "narrowband",
            GeneratorKind::Lorenz63 { .. } => "lorenz63",
        }
    }

    /// One-line description of the generator parameters for manifests and reports.
    pub fn describe(&self) -> String {
        let params = match &self.kind {
            GeneratorKind::OrnsteinUhlenbeck { drift, diffusion } => format!(
                "drift={} diffusion={}",
                fmt_matrix(drift),
                fmt_matrix(diffusion)
            ),
            GeneratorKind::Narrowband {
                omega0,
                bandwidth,
                amplitude,
                quadrature,
                noise,
            } => format!(
                "omega0={omega0} bandwidth={bandwidth} amplitude={amplitude:?} quadrature={quadrature:?} noise={noise}"
            ),
            GeneratorKind::Lorenz63 {
                sigma,
                rho,
                beta,
                observed,
            } => format!("sigma={sigma} rho={rho} beta={beta} observed={observed:?}"),
        };
        format!(
            "{} {params} seed={} burn_in={}",
            self.kind_name(),
            self.seed,
            self.burn_in
        )
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            GeneratorKind::OrnsteinUhlenbeck { drift, diffusion } => {
                if drift.nrows() == 0 || !drift.is_square() {
                    return Err(Error::DimensionMismatch("drift matrix must be square and nonempty".into()));
                }
                if diffusion.nrows() != drift.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "diffusion has {} rows, drift is {}x{}",
                        diffusion.nrows(),
                        drift.nrows(),
                        drift.ncols()
                    )));
                }
                if drift.iter().chain(diffusion.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("OU parameters must be finite".into()));
                }
                let max_real_part = drift
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z.re)
                    .fold(f64::NEG_INFINITY, f64::max);
                if max_real_part >= 0.0 {
                    return Err(Error::UnstableDrift { max_real_part });
                }
            }
            GeneratorKind::Narrowband {
                omega0,
                bandwidth,
                amplitude,
                quadrature,
                noise,
            } => {
                if amplitude.is_empty() || quadrature.len() != amplitude.len() {
                    return Err(Error::DimensionMismatch(
                        "narrowband amplitude and quadrature patterns must be nonempty and of equal length".into(),
                    ));
                }
                if !(omega0.is_finite() && *bandwidth >= 0.0 && bandwidth.is_finite() && *noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "narrowband needs finite omega0, bandwidth >= 0 and noise >= 0".into(),
                    ));
                }
            }
            GeneratorKind::Lorenz63 { observed, .. } => {
                if observed.is_empty() || observed.iter().any(|&c| c > 2) {
                    return Err(Error::InvalidParameter(
                        "lorenz63 observed coordinates must be a nonempty subset of {0,1,2}".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// Generates `n_snapshots` samples at spacing `dt`, after discarding `burn_in` samples.
pub fn generate(spec: &GeneratorSpec, n_snapshots: usize, dt: f64) -> Result<SnapshotSeries> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if n_snapshots == 0 {
        return Err(Error::InvalidParameter("n_snapshots must be >= 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let n = spec.dim();
    let mut out = Vec::with_capacity(n * n_snapshots);
    match &spec.kind {
        GeneratorKind::OrnsteinUhlenbeck { drift, diffusion } => {
            let model = OuModel::new(drift.clone(), diffusion.clone(), dt)?;
            model.sample_into(&mut rng, spec.burn_in, n_snapshots, &mut out);
        }
        GeneratorKind::Narrowband {
            omega0,
            bandwidth,
            amplitude,
            quadrature,
            noise,
        } => narrowband(
            &mut rng,
            *omega0,
            *bandwidth,
            amplitude,
            quadrature,
            *noise,
            dt,
            spec.burn_in,
            n_snapshots,
            &mut out,
        ),
        GeneratorKind::Lorenz63 {
            sigma,
            rho,
            beta,
            observed,
        } => lorenz63(
            &mut rng,
            [*sigma, *rho, *beta],
            observed,
            dt,
            spec.burn_in,
            n_snapshots,
            &mut out,
        ),
    }
    SnapshotSeries::new(DMatrix::from_vec(n, n_snapshots, out), dt)
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Exact discretisation of a linear OU process at a fixed time step.
///
/// `x_{k+1} = e^{A dt} x_k + w_k` with `w_k ~ N(0, Q)`,
/// `Q = S - e^{A dt} S e^{A^T dt}` and `S` the stationary covariance solving
/// `A S + S A^T + B B^T = 0`.
#[derive(Debug, Clone)]
pub struct OuModel {
    propagator: DMatrix<f64>,
    stationary: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
    stationary_factor: DMatrix<f64>,
}

impl OuModel {
    pub fn new(drift: DMatrix<f64>, diffusion: DMatrix<f64>, dt: f64) -> Result<Self> {
        let spec = GeneratorSpec::ou(drift.clone(), diffusion.clone(), 0);
        spec.validate()?;
        let stationary = solve_lyapunov(&drift, &(&diffusion * diffusion.transpose()))?;
        let propagator = (&drift * dt).exp();
        let q = &stationary - &propagator * &stationary * propagator.transpose();
        Ok(Self {
            noise_factor: psd_factor(&q),
            stationary_factor: psd_factor(&stationary),
            propagator,
            stationary,
        })
    }

    /// Stationary covariance `S = E[x x^T]`.
    pub fn stationary_covariance(&self) -> &DMatrix<f64> {
        &self.stationary
    }

    /// `e^{A dt}`.
    pub fn propagator(&self) -> &DMatrix<f64> {
        &self.propagator
    }

    /// Exact lag correlation `E[x_k x_{k+lag}^T] = S (e^{A dt lag})^T`.
    pub fn lag_correlation(&self, lag: usize) -> DMatrix<f64> {
        let mut p = DMatrix::identity(self.stationary.nrows(), self.stationary.nrows());
        for _ in 0..lag {
            p = &self.propagator * p;
        }
        &self.stationary * p.transpose()
    }

    fn sample_into(&self, rng: &mut ChaCha20Rng, burn_in: usize, count: usize, out: &mut Vec<f64>) {
        let n = self.stationary.nrows();
        let draw = |rng: &mut ChaCha20Rng, factor: &DMatrix<f64>| {
            let xi = DVector::from_fn(n, |_, _| normal(rng));
            factor * xi
        };
        // Start from the stationary law so the whole record is stationary.
        let mut x = draw(rng, &self.stationary_factor);
        for _ in 0..burn_in {
            x = &self.propagator * x + draw(rng, &self.noise_factor);
        }
        for k in 0..count {
            if k > 0 {
                x = &self.propagator * x + draw(rng, &self.noise_factor);
            }
            out.extend(x.iter());
        }
    }
}

/// Solves `A S + S A^T + C = 0` through the Kronecker-vectorised system.
fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, c.iter().map(|v| -v));
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("Lyapunov equation is singular".into()))?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// `F` with `F F^T = M` for symmetric PSD `M`; tiny negative eigenvalues are clipped.
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut f = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

#[allow(clippy::too_many_arguments)]
fn narrowband(
    rng: &mut ChaCha20Rng,
    omega0: f64,
    bandwidth: f64,
    amplitude: &[f64],
    quadrature: &[f64],
    noise: f64,
    dt: f64,
    burn_in: usize,
    count: usize,
    out: &mut Vec<f64>,
) {
    let rotation = Complex::from_polar((-bandwidth * dt).exp(), omega0 * dt);
    let kick = (1.0 - (-2.0 * bandwidth * dt).exp()).sqrt();
    let mut z = if bandwidth > 0.0 {
        Complex::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
    } else {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        Complex::from_polar(1.0, phase)
    };
    let step = |z: Complex<f64>, rng: &mut ChaCha20Rng| {
        let mut next = rotation * z;
        if bandwidth > 0.0 {
            next += Complex::new(normal(rng), normal(rng)) * (kick * std::f64::consts::FRAC_1_SQRT_2);
        }
        next
    };
    for _ in 0..burn_in {
        z = step(z, rng);
    }
    for k in 0..count {
        if k > 0 {
            z = step(z, rng);
        }
        for (a, b) in amplitude.iter().zip(quadrature) {
            let mut v = a * z.re + b * z.im;
            if noise > 0.0 {
                v += noise * normal(rng);
            }
            out.push(v);
        }
    }
}

const LORENZ_SUBSTEPS: usize = 10;

fn lorenz63(
    rng: &mut ChaCha20Rng,
    [sigma, rho, beta]: [f64; 3],
    observed: &[usize],
    dt: f64,
    burn_in: usize,
    count: usize,
    out: &mut Vec<f64>,
) {
    let rhs = |s: [f64; 3]| {
        [
            sigma * (s[1] - s[0]),
            s[0] * (rho - s[2]) - s[1],
            s[0] * s[1] - beta * s[2],
        ]
    };
    let axpy = |s: [f64; 3], k: [f64; 3], h: f64| [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]];
    let h = dt / LORENZ_SUBSTEPS as f64;
    let advance = |mut s: [f64; 3]| {
        for _ in 0..LORENZ_SUBSTEPS {
            let k1 = rhs(s);
            let k2 = rhs(axpy(s, k1, h / 2.0));
            let k3 = rhs(axpy(s, k2, h / 2.0));
            let k4 = rhs(axpy(s, k3, h));
            for i in 0..3 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s
    };
    let mut s = [
        1.0 + 1e-3 * normal(rng),
        1.0 + 1e-3 * normal(rng),
        1.0 + 1e-3 * normal(rng),
    ];
    for _ in 0..burn_in {
        s = advance(s);
    }
    for k in 0..count {
        if k > 0 {
            s = advance(s);
        }
        out.extend(observed.iter().map(|&c| s[c]));
    }
}
