use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stpod_core::decomposition::io as mode_io;
use stpod_core::timeseries::{load, SeriesFormat};
use stpod_core::{spacetime_pod_toeplitz, WeightSpec};

fn stpod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stpod"))
        .args(args)
        .env_remove("STPOD_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = stpod(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(output: &Path) -> String {
    std::fs::read_to_string(format!("{}.manifest", output.display())).unwrap()
}

fn manifest_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

#[test]
fn generate_writes_requested_shape_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "x.stpd");
    let b = path(dir.path(), "y.stpd");
    for out in [&a, &b] {
        ok(&["generate", "--kind", "ou", "--n", "1000", "--dt", "0.1", "--seed", "7", "-o", s(out)]);
    }
    let series = load(&a, SeriesFormat::Stpd).unwrap();
    assert_eq!((series.dim(), series.len(), series.dt()), (1, 1000, 0.1));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = manifest(&a);
    assert_eq!(manifest_value(&m, "seed").as_deref(), Some("7"));
    assert!(manifest_value(&m, "version").is_some());
    assert!(manifest_value(&m, "threads").is_some());
}

#[test]
fn invalid_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stpod(&["generate", "--kind", "brownian", "--n", "10", "-o", s(&path(dir.path(), "z.stpd"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("brownian"));
}

#[test]
fn unstable_drift_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stpod(&[
        "generate", "--drift", "0.1", "--diffusion", "1", "--n", "10", "-o",
        s(&path(dir.path(), "z.stpd")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn sample_series(dir: &Path, n: &str) -> PathBuf {
    let p = path(dir, "x.stpd");
    ok(&["generate", "--kind", "ou", "--dim", "2", "--tau", "2", "--n", n, "--dt", "0.1", "--seed", "3", "-o", s(&p)]);
    p
}

#[test]
fn hankel_decomposition_with_window_of_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_series(dir.path(), "500");
    let out = path(dir.path(), "modes.stpm");
    ok(&["decompose", "--method", "hankel", "--d", "21", "-i", s(&input), "-o", s(&out)]);
    let modes = mode_io::load(&out).unwrap();
    let m = 500 - 21 + 1;
    assert_eq!(modes.len(), (2 * 21).min(m));
    let man = manifest(&out);
    assert_eq!(manifest_value(&man, "T").unwrap().parse::<f64>().unwrap(), 2.0);
    let energies = std::fs::read_to_string(format!("{}.energies.csv", out.display())).unwrap();
    assert_eq!(energies.lines().count(), modes.len() + 1);
}

#[test]
fn spaced_decomposition_keeps_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_series(dir.path(), "2000");
    let (h, sp) = (path(dir.path(), "h.stpm"), path(dir.path(), "s.stpm"));
    ok(&["decompose", "--method", "hankel", "--d", "21", "-i", s(&input), "-o", s(&h)]);
    ok(&["decompose", "--method", "spaced", "--d", "21", "--s", "10", "-i", s(&input), "-o", s(&sp)]);
    let (mh, ms) = (mode_io::load(&h).unwrap().m_used, mode_io::load(&sp).unwrap().m_used);
    assert_eq!(mh, 1980);
    assert_eq!(ms, (2000 - 21) / 10 + 1);
    assert_eq!(manifest_value(&manifest(&h), "T"), manifest_value(&manifest(&sp), "T"));
}

#[test]
fn toeplitz_command_matches_library_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "scalar.stpd");
    ok(&["generate", "--tau", "10", "--n", "400", "--dt", "1", "--seed", "5", "-o", s(&input)]);
    let out = path(dir.path(), "t.stpm");
    ok(&["decompose", "--method", "toeplitz", "--d", "30", "-i", s(&input), "-o", s(&out)]);
    let series = load(&input, SeriesFormat::Stpd).unwrap();
    let lib = spacetime_pod_toeplitz(&series, 30, &WeightSpec::uniform(1), 30).unwrap();
    let file = mode_io::load(&out).unwrap();
    assert_eq!(file.energies, lib.energies);
    assert_eq!(file.modes, lib.modes);
}

#[test]
fn matrix_flags_accept_leading_minus() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.csv");
    ok(&["generate", "--drift", "-0.1,0.05;0,-0.2", "--diffusion", "0.4,0;0.1,0.3", "--n", "50", "-o", s(&out)]);
    assert_eq!(load(&out, SeriesFormat::Csv).unwrap().dim(), 2);
}

#[test]
fn decomposition_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_series(dir.path(), "50");
    let out = path(dir.path(), "m.stpm");
    let short = stpod(&["decompose", "--method", "hankel", "--d", "80", "-i", s(&input), "-o", s(&out)]);
    assert_eq!(short.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&short.stderr).contains("series shorter than embedding window"));

    let weights = path(dir.path(), "w.txt");
    std::fs::write(&weights, "1.0 2.0 3.0\n").unwrap();
    let mismatch = stpod(&[
        "decompose", "--method", "hankel", "--d", "3", "--weight", s(&weights), "-i", s(&input), "-o", s(&out),
    ]);
    assert_eq!(mismatch.status.code(), Some(2));

    let missing = stpod(&["decompose", "--method", "hankel", "-i", s(&path(dir.path(), "nope.stpd")), "-o", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn spod_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let input = sample_series(dir.path(), "1024");
    let out = path(dir.path(), "f.stpf");
    ok(&[
        "decompose", "--method", "spod", "--n-fft", "64", "--overlap", "0.5", "--window", "hann", "--one-sided", "-i",
        s(&input), "-o", s(&out),
    ]);
    let info = ok(&["info", s(&out)]);
    let text = String::from_utf8_lossy(&info.stdout);
    assert!(text.contains("STPF") && text.contains("bins = 33"), "{text}");
    let info = ok(&["info", s(&input)]);
    assert!(String::from_utf8_lossy(&info.stdout).contains("N = 2, L = 1024"));
}

#[test]
fn study_csv_has_one_row_per_cell_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "study.cfg");
    std::fs::write(
        &cfg,
        "# spaced vs hankel\ntau = 10\nmethods = hankel,spaced\nm = 20,40\nd = 10\ns = 10\ntrials = 3\nseed = 9\nreference_min = 50000\n",
    )
    .unwrap();
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    ok(&["study", "--config", s(&cfg), "-o", s(&a)]);
    ok(&["study", "--config", s(&cfg), "-o", s(&b)]);
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv, std::fs::read_to_string(&b).unwrap());
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.lines().next().unwrap().starts_with("cell,method,m,d,s,N,L,T"));
    let summary = std::fs::read_to_string(format!("{}.summary.json", a.display())).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 4);
    assert!(manifest_value(&manifest(&a), "decorrelation_time").is_some());
}

#[test]
fn config_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "gen.cfg");
    std::fs::write(&cfg, "n = 100\ndt = 0.5\nseed = 1\n").unwrap();
    let out = path(dir.path(), "x.csv");
    ok(&["generate", "--config", s(&cfg), "--n", "40", "-o", s(&out)]);
    let series = load(&out, SeriesFormat::Csv).unwrap();
    assert_eq!((series.len(), series.dt()), (40, 0.5));
}

#[test]
fn zero_trials_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = stpod(&["study", "--trials", "0", "-o", s(&path(dir.path(), "s.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.stpd");
    let status = Command::new(env!("CARGO_BIN_EXE_stpod"))
        .args(["generate", "--n", "10", "-o", s(&out)])
        .env("STPOD_THREADS", "3")
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(manifest_value(&manifest(&out), "threads").as_deref(), Some("3"));
}

#[test]
fn bench_reports_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "bench.csv");
    ok(&["bench", "--scenario", "svd-columns", "--reps", "1", "-o", s(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("timing,")).count(), 3);
    assert!(csv.lines().any(|l| l.starts_with("slope,svd-columns")));
}
