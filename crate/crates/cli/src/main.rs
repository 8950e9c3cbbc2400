//! `mfgrid` command-line driver.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfgrid::analysis::{angle_ci_propagated, ExtrapolationReport};
use mfgrid::errorgrid::{enumerate_grid_with_progress, subsample_grid_with_progress, DEFAULT_TEST_SIZE_FACTOR};
use mfgrid::io::{self as fio, ExperimentManifest};
use mfgrid::study::{self, Case};
use mfgrid::{
    budget_split, extrapolation_report, fit_plane, list_functions, median_grid, mf_lhs, CostModel, Error, FitOn,
    FitOptions, GradientFit, GridConfig, Method, MultiFidelity, MultiFidelityFunction, TestMode,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        Self { code, msg: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::config(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Attaches the offending flag to a library error.
fn flag<T>(name: &str, r: mfgrid::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.msg = format!("invalid --{name}: {}", f.msg);
        f
    })
}

#[derive(Parser)]
#[command(name = "mfgrid", version, about = "Error grids and budget splits for bi-fidelity surrogate models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark catalog.
    #[command(subcommand)]
    Functions(FunctionsCmd),
    /// Designs of experiments.
    #[command(subcommand)]
    Doe(DoeCmd),
    /// Error-grid construction.
    #[command(subcommand)]
    Grid(GridCmd),
    /// Plane fit, budget split and extrapolation.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Multi-case experiments.
    #[command(subcommand)]
    Study(StudyCmd),
}

#[derive(Subcommand)]
enum FunctionsCmd {
    /// List benchmark functions.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum DoeCmd {
    /// Nested bi-fidelity Latin hypercube, written as CSV.
    Generate {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        n_high: usize,
        #[arg(long)]
        n_low: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave the `y` column empty.
        #[arg(long)]
        unevaluated: bool,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct FunctionArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    param_a: Option<f64>,
}

impl FunctionArgs {
    fn build(&self) -> CliResult<MultiFidelityFunction> {
        let name = if self.param_a.is_some() { "param-a" } else { "function" };
        flag(name, MultiFidelityFunction::new(&self.function, self.param_a))
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[arg(long, default_value_t = 50)]
    n_high_max: usize,
    #[arg(long, default_value_t = 125)]
    n_low_max: usize,
    /// Independent repetitions per cell.
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent test-set size is this factor times the dimension.
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE_FACTOR)]
    test_size_factor: usize,
    #[command(flatten)]
    run: RunArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Store the creation time in the manifest.
    #[arg(long)]
    record_time: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, env = "FP_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestModeArg {
    Cv,
    External,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Full enumeration with a fresh design per cell and repetition.
    Enumerate(GridArgs),
    /// Subsampling from one evaluated design.
    Subsample {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "cv")]
        test_mode: TestModeArg,
    },
    /// Per-cell median of log10 MSE.
    Median {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a dense matrix for plotting.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitOnArg {
    All,
    Medians,
}

#[derive(Args, Clone)]
struct CostArgs {
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    budget: f64,
}

impl CostArgs {
    fn build(&self) -> CliResult<CostModel> {
        let name = if self.phi > 0.0 && self.phi < 1.0 { "budget" } else { "phi" };
        flag(name, CostModel::new(self.phi, self.budget))
    }
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Least-squares plane through log10 MSE.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        fit_min_nh: usize,
        #[arg(long, default_value_t = 0)]
        fit_min_nl: usize,
        #[arg(long, value_enum, default_value = "all")]
        fit_on: FitOnArg,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        /// Also report the first-order propagated angle interval.
        #[arg(long)]
        ci_propagated: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split an additional budget between fidelities.
    Split {
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        /// Current design sizes as `n_high,n_low`.
        #[arg(long, value_parser = parse_pair)]
        initial: Option<(usize, usize)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median log10 MSE along the budget line against the predicted split.
    Extrapolate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
        #[arg(long, value_parser = parse_pair)]
        initial: (usize, usize),
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct StudyArgs {
    /// Case as `name` or `name:A`; repeat for several. Defaults depend on the study.
    #[arg(long = "case", value_parser = parse_case)]
    cases: Vec<Case>,
    #[arg(long, default_value_t = 50)]
    n_high_max: usize,
    #[arg(long, default_value_t = 125)]
    n_low_max: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE_FACTOR)]
    test_size_factor: usize,
    #[command(flatten)]
    run: RunArgs,
}

impl StudyArgs {
    fn config(&self) -> CliResult<GridConfig> {
        let cfg = GridConfig {
            test_size_factor: self.test_size_factor,
            ..GridConfig::new(self.n_high_max, self.n_low_max, self.iterations, self.seed)
        }
        .with_workers(self.run.workers as usize);
        validate_config(&cfg)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum StudyCmd {
    /// Enumeration against both subsampling variants.
    CompareSubsampling {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Output directory for `angles.csv` and `report.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation and gradient angle per case.
    AngleVsCorrelation {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected 'n_high,n_low', got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_case(s: &str) -> Result<Case, String> {
    let (name, a) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}"))?)),
        None => (s, None),
    };
    let case = Case::new(name.trim(), a);
    case.build().map_err(|e| e.to_string())?;
    Ok(case)
}

fn validate_config(cfg: &GridConfig) -> CliResult {
    if cfg.n_high_max < 2 {
        return Err(Failure::config(format!("invalid --n-high-max: must be >= 2, got {}", cfg.n_high_max)));
    }
    if cfg.n_low_max <= cfg.n_high_max {
        return Err(Failure::config(format!(
            "invalid --n-low-max: must exceed --n-high-max ({}), got {}",
            cfg.n_high_max, cfg.n_low_max
        )));
    }
    if cfg.iterations < 1 {
        return Err(Failure::config("invalid --iterations: must be >= 1"));
    }
    if cfg.test_size_factor < 1 {
        return Err(Failure::config("invalid --test-size-factor: must be >= 1"));
    }
    Ok(())
}

/// Throttled `done/total` reporting with a linear ETA on standard error.
struct Progress {
    label: String,
    start: Instant,
    last: Mutex<Option<Instant>>,
    quiet: bool,
}

impl Progress {
    fn new(label: impl Into<String>, quiet: bool) -> Self {
        Self { label: label.into(), start: Instant::now(), last: Mutex::new(None), quiet }
    }

    fn update(&self, done: usize, total: usize) {
        if self.quiet {
            return;
        }
        let now = Instant::now();
        let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
        if done < total && last.is_some_and(|t| now - t < Duration::from_secs(2)) {
            return;
        }
        *last = Some(now);
        let elapsed = self.start.elapsed().as_secs_f64();
        let eta = if done > 0 { elapsed / done as f64 * (total - done) as f64 } else { 0.0 };
        eprintln!("{}: {done}/{total} cells, elapsed {elapsed:.0}s, eta {eta:.0}s", self.label);
    }
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => match io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn functions_list(json: bool) -> CliResult {
    use std::fmt::Write as _;
    let catalog = list_functions();
    if json {
        return write_output(None, &(serde_json::to_string_pretty(&catalog)? + "\n"));
    }
    let mut text = format!("{:<20} {:>3}  {:<10}  bounds\n", "name", "dim", "adjustable");
    for e in catalog {
        let bounds: Vec<String> = e.bounds.iter().map(|(l, u)| format!("[{l}, {u}]")).collect();
        let adjustable = if e.adjustable { "yes" } else { "no" };
        let _ = writeln!(text, "{:<20} {:>3}  {:<10}  {}", e.name, e.dim, adjustable, bounds.join(" "));
    }
    write_output(None, &text)
}

fn doe_generate(
    function: &FunctionArgs,
    n_high: usize,
    n_low: usize,
    seed: u64,
    unevaluated: bool,
    out: Option<&Path>,
) -> CliResult {
    let f = function.build()?;
    let doe = flag("n-low", mf_lhs(n_high, n_low, f.bounds(), seed))?;
    let doe = if unevaluated { doe } else { doe.evaluate(&f)? };
    let mut buf = Vec::new();
    fio::write_doe_to(&mut buf, &doe)?;
    write_output(out, &String::from_utf8_lossy(&buf))
}

fn grid_run(args: &GridArgs, mode: Option<TestMode>) -> CliResult {
    let f = args.function.build()?;
    let cfg = GridConfig {
        test_size_factor: args.test_size_factor,
        ..GridConfig::new(args.n_high_max, args.n_low_max, args.iterations, args.seed)
    }
    .with_workers(args.run.workers as usize);
    validate_config(&cfg)?;
    fs::create_dir_all(&args.out)?;

    let progress = Progress::new(f.name(), args.run.quiet);
    let grid = match mode {
        None => enumerate_grid_with_progress(&f, &cfg, |d, t| progress.update(d, t))?,
        Some(m) => subsample_grid_with_progress(&f, &cfg, m, |d, t| progress.update(d, t))?,
    };
    let method = mode.map_or(Method::Enumeration, TestMode::method);
    let mut manifest = ExperimentManifest::new(f.name(), f.param_a(), method, &cfg, mode);
    if args.record_time {
        manifest = manifest.with_timestamp();
    }
    fio::write_manifest(args.out.join("manifest.json"), &manifest)?;
    fio::write_grid(args.out.join("grid.csv"), &grid)?;
    let median = median_grid(&grid);
    fio::write_median(args.out.join("median.csv"), &median)?;
    fio::write_heatmap(args.out.join("heatmap.csv"), &median)?;
    let failures = grid.n_failures();
    if failures > 0 {
        eprintln!("warning: {failures} of {} fits failed and were recorded as empty values", grid.n_values());
    }
    Ok(())
}

/// Reads a grid and, if a manifest sits next to it, checks that both agree.
fn load_grid(path: &Path) -> CliResult<mfgrid::ErrorGrid> {
    let grid = flag("in", fio::read_grid(path))?;
    if let Some(manifest) = path.parent().map(|d| d.join("manifest.json")).filter(|p| p.exists()) {
        let m = fio::read_manifest(&manifest)?;
        fio::check_grid_against(&grid, &m)?;
    }
    Ok(grid)
}

fn analyze_fit(
    input: &Path,
    opts: FitOptions,
    ci_propagated: bool,
    out: Option<&Path>,
) -> CliResult {
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Failure::config(format!("invalid --confidence: must lie in (0, 1), got {}", opts.confidence)));
    }
    let grid = load_grid(input)?;
    let mut fit = fit_plane(&grid, &opts)?;
    if ci_propagated {
        fit.theta_ci_propagated_deg = angle_ci_propagated(&fit, opts.confidence).ok().map(|(a, b)| [a, b]);
    }
    write_output(out, &(serde_json::to_string_pretty(&fit)? + "\n"))
}

fn read_fit(path: &Path) -> CliResult<GradientFit> {
    flag("fit", fio::read_json(path))
}

fn analyze_split(fit: &Path, cost: &CostArgs, initial: Option<(usize, usize)>, out: Option<&Path>) -> CliResult {
    let cost = cost.build()?;
    let fit = read_fit(fit)?;
    let mut split = budget_split(&fit, &cost)?;
    if let Some((h, l)) = initial {
        split = split.with_initial(h, l);
    }
    write_output(out, &(serde_json::to_string_pretty(&split)? + "\n"))
}

fn analyze_extrapolate(grid: &Path, fit: &Path, cost: &CostArgs, initial: (usize, usize), out: Option<&Path>) -> CliResult {
    let cost = cost.build()?;
    let fit = read_fit(fit)?;
    let grid = flag("grid", fio::read_grid(grid))?;
    let report: ExtrapolationReport = extrapolation_report(&grid, &fit, initial, &cost)?;
    let mut buf = Vec::new();
    fio::write_extrapolation_to(&mut buf, &report)?;
    write_output(out, &String::from_utf8_lossy(&buf))
}

fn compare_subsampling(args: &StudyArgs, repeats: usize, out: &Path) -> CliResult<u8> {
    let cfg = args.config()?;
    if repeats < 1 {
        return Err(Failure::config("invalid --repeats: must be >= 1"));
    }
    let cases = if args.cases.is_empty() { study::default_comparison_cases() } else { args.cases.clone() };
    fs::create_dir_all(out)?;
    let quiet = args.run.quiet;
    let n = cases.len();
    let report = study::compare_subsampling(&cases, &cfg, repeats, &|i, c| {
        if !quiet {
            match &c.error {
                None => eprintln!("[{}/{n}] {}: enumeration {:.1} deg", i + 1, c.case.label(), c.enumeration_theta.unwrap_or(f64::NAN)),
                Some(e) => eprintln!("[{}/{n}] {}: failed: {e}", i + 1, c.case.label()),
            }
        }
    });
    let mut buf = Vec::new();
    study::write_comparison_to(&mut buf, &report)?;
    fs::write(out.join("angles.csv"), buf)?;
    fio::write_json(out.join("report.json"), &report)?;
    println!(
        "correlation with enumeration: external {}, cv {}",
        report.corr_external.map_or("undefined".into(), |r| format!("{r:.3}")),
        report.corr_cv.map_or("undefined".into(), |r| format!("{r:.3}"))
    );
    Ok(if report.n_failed() > 0 { EXIT_PARTIAL } else { 0 })
}

fn default_angle_cases() -> Vec<Case> {
    let mut cases: Vec<Case> = ["booth", "currin", "park91a", "borehole"].iter().map(|n| Case::new(n, None)).collect();
    cases.extend(study::default_comparison_cases());
    cases
}

fn angle_vs_correlation(args: &StudyArgs, out: Option<&Path>) -> CliResult<u8> {
    let cfg = args.config()?;
    let cases = if args.cases.is_empty() { default_angle_cases() } else { args.cases.clone() };
    let quiet = args.run.quiet;
    let n = cases.len();
    let rows = study::angle_vs_correlation(&cases, &cfg, &|i, r| {
        if !quiet {
            match r {
                Ok(r) => eprintln!("[{}/{n}] {}: r = {:.3}, theta = {:.1} deg", i + 1, r.case.label(), r.r, r.theta_deg),
                Err(e) => eprintln!("[{}/{n}] failed: {e}", i + 1),
            }
        }
    });
    let mut buf = Vec::new();
    study::write_angle_rows_to(&mut buf, &rows)?;
    write_output(out, &String::from_utf8_lossy(&buf))?;
    Ok(if rows.iter().any(|(_, r)| r.is_err()) { EXIT_PARTIAL } else { 0 })
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Functions(FunctionsCmd::List { json }) => functions_list(json)?,
        Command::Doe(DoeCmd::Generate { function, n_high, n_low, seed, unevaluated, out }) => {
            doe_generate(&function, n_high, n_low, seed, unevaluated, out.as_deref())?
        }
        Command::Grid(GridCmd::Enumerate(args)) => grid_run(&args, None)?,
        Command::Grid(GridCmd::Subsample { grid, test_mode }) => {
            let mode = match test_mode {
                TestModeArg::Cv => TestMode::Cv,
                TestModeArg::External => TestMode::External { test_size_factor: grid.test_size_factor },
            };
            grid_run(&grid, Some(mode))?
        }
        Command::Grid(GridCmd::Median { input, out, heatmap }) => {
            let median = median_grid(&load_grid(&input)?);
            fio::write_median(&out, &median)?;
            if let Some(h) = heatmap {
                fio::write_heatmap(h, &median)?;
            }
        }
        Command::Analyze(AnalyzeCmd::Fit { input, fit_min_nh, fit_min_nl, fit_on, confidence, ci_propagated, out }) => {
            let fit_on = match fit_on {
                FitOnArg::All => FitOn::All,
                FitOnArg::Medians => FitOn::Medians,
            };
            let opts = FitOptions { min_nh: fit_min_nh, min_nl: fit_min_nl, fit_on, confidence };
            analyze_fit(&input, opts, ci_propagated, out.as_deref())?
        }
        Command::Analyze(AnalyzeCmd::Split { fit, cost, initial, out }) => {
            analyze_split(&fit, &cost, initial, out.as_deref())?
        }
        Command::Analyze(AnalyzeCmd::Extrapolate { grid, fit, cost, initial, out }) => {
            analyze_extrapolate(&grid, &fit, &cost, initial, out.as_deref())?
        }
        Command::Study(StudyCmd::CompareSubsampling { study, repeats, out }) => {
            return compare_subsampling(&study, repeats, &out)
        }
        Command::Study(StudyCmd::AngleVsCorrelation { study, out }) => return angle_vs_correlation(&study, out.as_deref()),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
