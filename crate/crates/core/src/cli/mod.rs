//! `stpod` command-line front end.
//!
//! Every command accepts `--config FILE`, a plain-text `key = value` file whose
//! entries are treated as `--key value` flags placed before the command-line
//! flags, so explicit flags win. Each run writes `<output>.manifest` with the
//! resolved configuration.

mod bench;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::analysis::{convergence_study, CellConfig, MeanHandling, Metric, ReferenceSpec, StudyConfig};
use crate::decomposition::{self, space_only_pod, spacetime_pod, spacetime_pod_toeplitz, Method, ModeSet, WeightSpec};
use crate::error::Error;
use crate::spod::{self, spod, SpodSpec, Window};
use crate::timeseries::{self, generate, GeneratorKind, GeneratorSpec, SeriesFormat, SnapshotSeries};

pub use bench::{run_bench, BenchReport, BenchScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "stpod", version, about = "Space-only, spectral and space-time POD of snapshot time series")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic snapshot series.
    Generate(GenerateArgs),
    /// Compute modes from a snapshot series.
    Decompose(DecomposeArgs),
    /// Run a seeded convergence study against converged reference modes.
    Study(StudyArgs),
    /// Time the decomposition paths and fit log-log slopes.
    Bench(BenchArgs),
    /// Print the header of a data or mode file.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "STPOD_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ou,
    Narrowband,
    Lorenz63,
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Ou)]
    pub kind: KindArg,
    /// OU correlation time when no drift matrix is given.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// OU dimension when no drift matrix is given.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// OU drift matrix, rows separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub drift: Option<String>,
    /// OU diffusion matrix, same layout as `--drift`.
    #[arg(long, allow_hyphen_values = true)]
    pub diffusion: Option<String>,
    /// Narrowband carrier frequency [rad/time].
    #[arg(long, default_value_t = 1.0)]
    pub omega0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bandwidth: f64,
    /// Narrowband in-phase spatial pattern, comma separated.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub amplitude: String,
    /// Narrowband quadrature spatial pattern (defaults to zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub quadrature: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 28.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 8.0 / 3.0)]
    pub beta: f64,
    /// Observed Lorenz coordinates, comma separated.
    #[arg(long, default_value = "0,1,2")]
    pub observe: String,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Number of snapshots.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Output file (`.csv` for text, anything else for STPD binary).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    SpaceOnly,
    Hankel,
    Spaced,
    Toeplitz,
    Spod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Rectangular,
    Hann,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Embedding depth.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Column spacing for `spaced`.
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    /// Number of modes to keep.
    #[arg(long)]
    pub r: Option<usize>,
    /// File with N positive weights.
    #[arg(long)]
    pub weight: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub n_fft: usize,
    /// Block overlap fraction in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    #[arg(long, value_enum, default_value_t = WindowArg::Rectangular)]
    pub window: WindowArg,
    #[arg(long)]
    pub one_sided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Similarity,
    CapturedEnergy,
    CumulativeEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeanArg {
    Raw,
    Subtract,
    Both,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Methods in the grid (space-only, hankel, spaced, toeplitz).
    #[arg(long, value_delimiter = ',', default_value = "hankel,toeplitz")]
    pub methods: Vec<String>,
    /// Column counts in the grid.
    #[arg(long, value_delimiter = ',', default_value = "30")]
    pub m: Vec<usize>,
    /// Embedding depths in the grid.
    #[arg(long, value_delimiter = ',', default_value = "30")]
    pub d: Vec<usize>,
    /// Column spacings used by `spaced` cells.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub s: Vec<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Similarity)]
    pub metric: MetricArg,
    /// One-based mode index for similarity and captured energy.
    #[arg(long, default_value_t = 1)]
    pub mode: usize,
    /// Number of modes for cumulative energy.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = MeanArg::Raw)]
    pub mean: MeanArg,
    #[arg(long, default_value_t = 100)]
    pub reference_factor: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reference_min: usize,
    #[arg(long, default_value_t = 0.999)]
    pub gate: f64,
    #[arg(long)]
    pub weight: Option<PathBuf>,
    /// Long-format CSV output; the summary goes to `<output>.summary.json`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    All,
    SvdColumns,
    Spacing,
    ToeplitzRatio,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ScenarioArg::All)]
    pub scenario: ScenarioArg,
    /// Timed repetitions per point (after one warm-up).
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Size multiplier for the benchmark grids.
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub path: PathBuf,
}

/// Parses `args` (including the program name), applying any `--config` file.
pub fn parse(args: &[String]) -> std::result::Result<Cli, clap::Error> {
    let expanded = match expand_config(args) {
        Ok(a) => a,
        Err(msg) => {
            return Err(clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{msg}\n")));
        }
    };
    Cli::try_parse_from(expanded)
}

/// Inserts `--key value` tokens from the config file right after the
/// subcommand so explicit flags, which come later, override them.
fn expand_config(args: &[String]) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args.to_vec());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let tokens = config_tokens(&text).map_err(|e| format!("{path}: {e}"))?;
    let Some(sub) = args.iter().skip(1).position(|a| !a.starts_with('-')) else {
        return Ok(args.to_vec());
    };
    let at = sub + 2;
    let mut out = args[..at].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

/// Converts `key = value` lines to flags. `true`/`false` values toggle switches.
pub fn config_tokens(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        if key == "config" {
            continue;
        }
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => {
                tokens.push(format!("--{key}"));
                tokens.push(value.to_string());
            }
        }
    }
    Ok(tokens)
}

/// Runs a parsed command; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => with_threads(a.common.threads, |t| cmd_generate(&a, t)),
        Command::Decompose(a) => with_threads(a.common.threads, |t| cmd_decompose(&a, t)),
        Command::Study(a) => with_threads(a.common.threads, |t| cmd_study(&a, t)),
        Command::Bench(a) => with_threads(a.common.threads, |t| cmd_bench(&a, t)),
        Command::Info(a) => cmd_info(&a.path),
    }
}

fn with_threads<F>(threads: usize, f: F) -> CliResult<()>
where
    F: FnOnce(usize) -> CliResult<()> + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| f(rayon::current_num_threads()))
}

/// Resolved configuration written next to each output.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, threads: usize) -> Self {
        let mut m = Self::default();
        m.set("tool", "stpod");
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m.set("threads", threads);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write_for(&self, output: &Path) -> CliResult<()> {
        write_file(&manifest_path(output), self.render().as_bytes())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    suffixed(output, ".manifest")
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("invalid {what} entry `{s}`"))))
        .collect()
}

fn parse_matrix(text: &str, what: &str) -> CliResult<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| parse_list(r, what))
        .collect::<CliResult<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(usage(format!("{what} must be square, rows separated by `;`")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl GeneratorArgs {
    pub fn spec(&self) -> CliResult<GeneratorSpec> {
        let mut spec = match self.kind {
            KindArg::Ou => match (&self.drift, &self.diffusion) {
                (Some(a), Some(b)) => GeneratorSpec::ou(parse_matrix(a, "drift")?, parse_matrix(b, "diffusion")?, self.seed),
                (None, None) => {
                    if self.tau <= 0.0 || self.dim == 0 {
                        return Err(usage("--tau must be positive and --dim at least 1"));
                    }
                    let a = DMatrix::identity(self.dim, self.dim) * (-1.0 / self.tau);
                    let b = DMatrix::identity(self.dim, self.dim) * (2.0 / self.tau).sqrt();
                    GeneratorSpec::ou(a, b, self.seed)
                }
                _ => return Err(usage("--drift and --diffusion must be given together")),
            },
            KindArg::Narrowband => {
                let amplitude: Vec<f64> = parse_list(&self.amplitude, "amplitude")?;
                let mut spec = GeneratorSpec::narrowband(self.omega0, self.bandwidth, amplitude.clone(), self.noise, self.seed);
                if let Some(q) = &self.quadrature {
                    let q: Vec<f64> = parse_list(q, "quadrature")?;
                    if q.len() != amplitude.len() {
                        return Err(usage("--quadrature must have the same length as --amplitude"));
                    }
                    if let GeneratorKind::Narrowband { quadrature, .. } = &mut spec.kind {
                        *quadrature = q;
                    }
                }
                spec
            }
            KindArg::Lorenz63 => GeneratorSpec {
                kind: GeneratorKind::Lorenz63 {
                    sigma: self.sigma,
                    rho: self.rho,
                    beta: self.beta,
                    observed: parse_list(&self.observe, "observe")?,
                },
                ..GeneratorSpec::lorenz63(self.seed)
            },
        };
        if let Some(b) = self.burn_in {
            spec = spec.with_burn_in(b);
        }
        Ok(spec)
    }
}

fn cmd_generate(a: &GenerateArgs, threads: usize) -> CliResult<()> {
    let spec = a.generator.spec()?;
    let series = generate(&spec, a.n, a.dt)?;
    let format = SeriesFormat::from_path(&a.output);
    timeseries::save(&series, &a.output, format)?;
    let mut m = Manifest::new("generate", threads);
    m.set("generator", spec.kind_name());
    m.set("parameters", spec.describe());
    m.set("seed", spec.seed);
    m.set("burn_in", spec.burn_in);
    m.set("n", a.n);
    m.set("dt", a.dt);
    m.set("N", series.dim());
    m.set("output", a.output.display());
    m.set("format", format!("{format:?}").to_lowercase());
    m.write_for(&a.output)?;
    println!("wrote {} (N = {}, L = {}, dt = {})", a.output.display(), series.dim(), series.len(), series.dt());
    Ok(())
}

/// Reads N positive weights separated by whitespace, commas or newlines.
pub fn read_weight_file(path: &Path) -> CliResult<WeightSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read weight file {}: {e}", path.display())))?;
    let values: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("invalid weight `{s}` in {}", path.display()))))
        .collect::<CliResult<_>>()?;
    Ok(WeightSpec::diagonal(values)?)
}

fn load_weight(path: Option<&Path>, n: usize) -> CliResult<WeightSpec> {
    let w = match path {
        Some(p) => read_weight_file(p)?,
        None => WeightSpec::uniform(n),
    };
    if w.dim() != n {
        return Err(usage(format!("weight has {} entries but the data has N = {n}", w.dim())));
    }
    Ok(w)
}

fn load_series(path: &Path) -> CliResult<SnapshotSeries> {
    Ok(timeseries::load(path, SeriesFormat::from_path(path))?)
}

fn energies_csv(energies: &[f64]) -> String {
    let mut out = String::from("mode,energy\n");
    for (k, e) in energies.iter().enumerate() {
        let _ = writeln!(out, "{},{e}", k + 1);
    }
    out
}

fn cmd_decompose(a: &DecomposeArgs, threads: usize) -> CliResult<()> {
    let series = load_series(&a.input)?;
    let weight = load_weight(a.weight.as_deref(), series.dim())?;
    let mut m = Manifest::new("decompose", threads);
    m.set("method", format!("{:?}", a.method).to_lowercase());
    m.set("input", a.input.display());
    m.set("output", a.output.display());
    m.set("N", series.dim());
    m.set("L", series.len());
    m.set("dt", series.dt());
    m.set("weight", a.weight.as_ref().map_or("uniform".to_string(), |p| p.display().to_string()));
    let energies_path = suffixed(&a.output, ".energies.csv");

    if a.method == MethodArg::Spod {
        let spec = SpodSpec {
            n_fft: a.n_fft,
            overlap: a.overlap,
            window: match a.window {
                WindowArg::Rectangular => Window::Rectangular,
                WindowArg::Hann => Window::Hann,
            },
            one_sided: a.one_sided,
        };
        let set = spod(&series, &spec, &weight)?;
        spod::save_stpf(&set, &a.output)?;
        let mut csv = String::from("bin,frequency,mode,energy\n");
        for bin in &set.bins {
            for (k, e) in bin.energies.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{e}", bin.index, bin.frequency, k + 1);
            }
        }
        write_file(&energies_path, csv.as_bytes())?;
        m.set("n_fft", spec.n_fft);
        m.set("overlap", spec.overlap);
        m.set("window", spec.window.name());
        m.set("one_sided", spec.one_sided);
        m.set("blocks", set.n_blocks);
        m.set("T", (spec.n_fft - 1) as f64 * series.dt());
        m.write_for(&a.output)?;
        println!("wrote {} ({} bins, {} blocks)", a.output.display(), set.bins.len(), set.n_blocks);
        return Ok(());
    }

    let modes: ModeSet = match a.method {
        MethodArg::SpaceOnly => {
            if a.d != 1 {
                return Err(usage("space-only takes no --d (the window is a single snapshot)"));
            }
            space_only_pod(&series, &weight)?
        }
        MethodArg::Hankel => {
            if a.s != 1 {
                return Err(usage("hankel uses s = 1; use --method spaced for s > 1"));
            }
            spacetime_pod(&series, a.d, 1, &weight)?
        }
        MethodArg::Spaced => spacetime_pod(&series, a.d, a.s, &weight)?,
        MethodArg::Toeplitz => {
            let size = series.dim() * a.d;
            let r = a.r.unwrap_or(size.min(decomposition::ToeplitzOptions::default().dense_limit));
            spacetime_pod_toeplitz(&series, a.d, &weight, r.min(size))?
        }
        MethodArg::Spod => unreachable!("handled above"),
    };
    let modes = match a.r {
        Some(r) => modes.truncated(r),
        None => modes,
    };
    decomposition::io::save(&modes, &a.output)?;
    write_file(&energies_path, energies_csv(&modes.energies).as_bytes())?;
    m.set("d", modes.d());
    m.set("s", modes.embedding.map_or(1, |e| e.s));
    m.set("m", modes.m_used);
    m.set("r", modes.len());
    m.set("T", modes.window());
    m.set("dropped", modes.diagnostics.dropped);
    m.set("significant_negative", modes.diagnostics.significant_negative);
    m.write_for(&a.output)?;
    println!(
        "wrote {} ({} modes, N = {}, d = {}, m = {}, T = {})",
        a.output.display(),
        modes.len(),
        modes.n,
        modes.d(),
        modes.m_used,
        modes.window()
    );
    Ok(())
}

fn cmd_study(a: &StudyArgs, threads: usize) -> CliResult<()> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.mode == 0 {
        return Err(usage("--mode is one-based"));
    }
    let generator = a.generator.spec()?;
    let methods: Vec<Method> = a
        .methods
        .iter()
        .map(|s| s.trim().parse::<Method>().map_err(|e| usage(e.to_string())))
        .collect::<CliResult<_>>()?;
    let mut cells = Vec::new();
    for &method in &methods {
        for &m in &a.m {
            match method {
                Method::SpaceOnly => cells.push(CellConfig::new(method, m, 1, 1)),
                Method::Spaced => {
                    for &d in &a.d {
                        for &s in &a.s {
                            cells.push(CellConfig::new(method, m, d, s));
                        }
                    }
                }
                Method::Hankel | Method::Toeplitz => {
                    for &d in &a.d {
                        cells.push(CellConfig::new(method, m, d, 1));
                    }
                }
            }
        }
    }
    let metric = match a.metric {
        MetricArg::Similarity => Metric::Similarity { mode: a.mode - 1 },
        MetricArg::CapturedEnergy => Metric::CapturedEnergy { mode: a.mode - 1 },
        MetricArg::CumulativeEnergy => Metric::CumulativeEnergy { k: a.k },
    };
    let weight = match &a.weight {
        Some(p) => Some(load_weight(Some(p), generator.dim())?),
        None => None,
    };
    let config = StudyConfig {
        generator: generator.clone(),
        dt: a.dt,
        cells,
        metric,
        trials: a.trials,
        seed: generator.seed,
        weight,
        reference: ReferenceSpec {
            length_factor: a.reference_factor,
            min_length: a.reference_min,
            gate: a.gate,
        },
        mean: match a.mean {
            MeanArg::Raw => MeanHandling::Raw,
            MeanArg::Subtract => MeanHandling::Subtract,
            MeanArg::Both => MeanHandling::Both,
        },
    };
    let report = convergence_study(&config)?;
    write_file(&a.output, report.to_csv().as_bytes())?;
    write_file(&suffixed(&a.output, ".summary.json"), report.summary_json().as_bytes())?;

    let mut m = Manifest::new("study", threads);
    m.set("generator", generator.kind_name());
    m.set("parameters", generator.describe());
    m.set("seed", generator.seed);
    m.set("dt", a.dt);
    m.set("methods", a.methods.join(","));
    m.set("m", join(&a.m));
    m.set("d", join(&a.d));
    m.set("s", join(&a.s));
    m.set("T", a.d.iter().map(|&d| ((d - 1) as f64 * a.dt).to_string()).collect::<Vec<_>>().join(","));
    m.set("metric", metric.name());
    m.set("trials", a.trials);
    m.set("mean", format!("{:?}", a.mean).to_lowercase());
    m.set("reference_factor", a.reference_factor);
    m.set("reference_min", a.reference_min);
    m.set("gate", a.gate);
    if let Some(tau) = report.decorrelation_time {
        m.set("decorrelation_time", tau);
    }
    m.write_for(&a.output)?;

    for c in &report.cells {
        println!(
            "{:<10} m={:<6} d={:<4} s={:<3} mean_removed={:<5} median={:.6} mean={:.6}",
            c.cell.method.name(),
            c.cell.m,
            c.cell.d,
            c.cell.s,
            c.mean_removed,
            c.median,
            c.mean
        );
    }
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_bench(a: &BenchArgs, threads: usize) -> CliResult<()> {
    if a.reps == 0 || a.scale == 0 {
        return Err(usage("--reps and --scale must be at least 1"));
    }
    let scenarios: Vec<BenchScenario> = match a.scenario {
        ScenarioArg::All => vec![BenchScenario::SvdColumns, BenchScenario::Spacing, BenchScenario::ToeplitzRatio],
        ScenarioArg::SvdColumns => vec![BenchScenario::SvdColumns],
        ScenarioArg::Spacing => vec![BenchScenario::Spacing],
        ScenarioArg::ToeplitzRatio => vec![BenchScenario::ToeplitzRatio],
    };
    let report = run_bench(&scenarios, a.reps, a.scale, a.seed)?;
    write_file(&a.output, report.to_csv().as_bytes())?;
    let mut m = Manifest::new("bench", threads);
    m.set("scenarios", scenarios.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
    m.set("reps", a.reps);
    m.set("scale", a.scale);
    m.set("seed", a.seed);
    for (name, slope) in &report.slopes {
        m.set(&format!("slope.{name}"), slope);
    }
    m.write_for(&a.output)?;
    for (name, slope) in &report.slopes {
        println!("{name}: log-log slope {slope:.3}");
    }
    Ok(())
}

fn cmd_info(path: &Path) -> CliResult<()> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    println!("{}", describe_file(&bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?);
    Ok(())
}

/// Human-readable header summary of any stpod file.
pub fn describe_file(bytes: &[u8]) -> std::result::Result<String, String> {
    match bytes.get(..4) {
        Some(b"STPD") => {
            let (version, n, l, dt) = timeseries::io::stpd_header(bytes)?;
            Ok(format!("STPD v{version}: N = {n}, L = {l}, dt = {dt}"))
        }
        Some(b"STPM") => {
            let (version, tag, n, d, r, dt) = decomposition::io::header(bytes)?;
            let method = Method::from_tag(tag).map_or("unknown", Method::name);
            let set = decomposition::io::decode(bytes)?;
            Ok(format!(
                "STPM v{version}: method = {method}, N = {n}, d = {d}, r = {r}, dt = {dt}, T = {}, m = {}, leading energy = {}",
                (d.max(1) - 1) as f64 * dt,
                set.m_used,
                set.energies.first().copied().unwrap_or(0.0)
            ))
        }
        Some(b"STPF") => {
            let set = spod::decode_stpf(bytes)?;
            let peak = set.peak_bin().map_or(0.0, |b| b.frequency);
            Ok(format!(
                "STPF: N = {}, n_fft = {}, bins = {}, blocks = {}, dt = {}, window = {}, one_sided = {}, peak frequency = {peak}",
                set.n,
                set.spec.n_fft,
                set.bins.len(),
                set.n_blocks,
                set.dt,
                set.spec.window.name(),
                set.spec.one_sided
            ))
        }
        _ => {
            let text = std::str::from_utf8(bytes).map_err(|_| "unrecognised file".to_string())?;
            let series = timeseries::io::decode_csv(text)?;
            Ok(format!("CSV: N = {}, L = {}, dt = {}", series.dim(), series.len(), series.dt()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_lines_become_flags() {
        let t = config_tokens("# comment\nkind = ou\nn_fft = 32\none_sided = true\nverbose = false\n").unwrap();
        assert_eq!(t, argv("--kind ou --n-fft 32 --one-sided"));
        assert!(config_tokens("oops").is_err());
    }

    #[test]
    fn explicit_flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "n = 10\ndt = 0.5\nseed = 3\n").unwrap();
        let args = argv(&format!("stpod generate --config {} --seed 9 -o x.stpd", cfg.display()));
        let Command::Generate(g) = parse(&args).unwrap().command else {
            panic!("wrong command")
        };
        assert_eq!(g.n, 10);
        assert_eq!(g.dt, 0.5);
        assert_eq!(g.generator.seed, 9);
    }

    #[test]
    fn matrix_parsing() {
        let m = parse_matrix("-1, 0.5; 0, -2", "drift").unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 1)], -2.0);
        assert!(parse_matrix("1,2;3", "drift").is_err());
    }
}
