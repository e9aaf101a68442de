use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::analysis::median;
use crate::decomposition::{spacetime_pod, spacetime_pod_toeplitz, WeightSpec};
use crate::error::Result;
use crate::timeseries::{derive_seed, generate, GeneratorSpec, SnapshotSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchScenario {
    /// Hankel SVD time against column count for a tall matrix.
    SvdColumns,
    /// Spaced-column SVD time against spacing `s` on a fixed series.
    Spacing,
    /// Toeplitz-to-Hankel time ratio against `N d` at fixed `m`.
    ToeplitzRatio,
}

impl BenchScenario {
    pub fn name(self) -> &'static str {
        match self {
            BenchScenario::SvdColumns => "svd-columns",
            BenchScenario::Spacing => "spacing",
            BenchScenario::ToeplitzRatio => "toeplitz-ratio",
        }
    }

    /// Slope expected from the operation counts.
    pub fn expected_slope(self) -> f64 {
        match self {
            BenchScenario::SvdColumns => 2.0,
            BenchScenario::Spacing => -2.0,
            BenchScenario::ToeplitzRatio => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub scenario: BenchScenario,
    pub label: &'static str,
    pub x: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    pub slopes: Vec<(String, f64)>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,scenario,label,x,value\n");
        for p in &self.points {
            let _ = writeln!(out, "timing,{},{},{},{}", p.scenario.name(), p.label, p.x, p.seconds);
        }
        for (name, s) in &self.slopes {
            let _ = writeln!(out, "slope,{name},,,{s}");
        }
        out
    }

    pub fn slope(&self, scenario: BenchScenario) -> Option<f64> {
        self.slopes.iter().find(|(n, _)| n == scenario.name()).map(|s| s.1)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    num / den
}

/// Median wall-clock seconds of `reps` runs after one warm-up.
fn time_median<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&samples))
}

fn series(n: usize, len: usize, seed: u64) -> Result<SnapshotSeries> {
    let drift = DMatrix::identity(n, n) * -0.1;
    let diffusion = DMatrix::identity(n, n) * 0.2f64.sqrt();
    generate(&GeneratorSpec::ou(drift, diffusion, seed), len, 1.0)
}

pub fn run_bench(scenarios: &[BenchScenario], reps: usize, scale: usize, seed: u64) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for (si, &scenario) in scenarios.iter().enumerate() {
        let data_seed = derive_seed(seed, si as u64, 0);
        let mut curve = Vec::new();
        match scenario {
            BenchScenario::SvdColumns => {
                let (n, d) = (4, 150 * scale);
                let w = WeightSpec::uniform(n);
                for m in [75 * scale, 150 * scale, 300 * scale] {
                    let s = series(n, m + d - 1, data_seed)?;
                    let t = time_median(reps, || spacetime_pod(&s, d, 1, &w).map(drop))?;
                    report.points.push(BenchPoint { scenario, label: "hankel", x: m as f64, seconds: t });
                    curve.push((m as f64, t));
                }
            }
            BenchScenario::Spacing => {
                let (n, d, m_h) = (4, 150 * scale, 480 * scale);
                let w = WeightSpec::uniform(n);
                let s_series = series(n, m_h + d - 1, data_seed)?;
                for s in [1usize, 2, 4, 8] {
                    let t = time_median(reps, || spacetime_pod(&s_series, d, s, &w).map(drop))?;
                    report.points.push(BenchPoint { scenario, label: "spaced", x: s as f64, seconds: t });
                    curve.push((s as f64, t));
                }
            }
            BenchScenario::ToeplitzRatio => {
                let (n, m) = (2, 50 * scale);
                let w = WeightSpec::uniform(n);
                for d in [50 * scale, 100 * scale, 200 * scale] {
                    let s = series(n, m + d - 1, data_seed)?;
                    let th = time_median(reps, || spacetime_pod(&s, d, 1, &w).map(drop))?;
                    let tt = time_median(reps, || spacetime_pod_toeplitz(&s, d, &w, n * d).map(drop))?;
                    let nd = (n * d) as f64;
                    report.points.push(BenchPoint { scenario, label: "hankel", x: nd, seconds: th });
                    report.points.push(BenchPoint { scenario, label: "toeplitz", x: nd, seconds: tt });
                    curve.push((nd, tt / th));
                }
            }
        }
        report.slopes.push((scenario.name().to_string(), loglog_slope(&curve)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(2.5))).collect();
        assert!((loglog_slope(&pts) - 2.5).abs() < 1e-12);
    }
}
