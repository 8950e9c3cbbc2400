//! Error grids: surrogate MSE over a triangle of `(n_high, n_low)` design sizes.
//!
//! [`enumerate_grid`] draws a fresh nested design for every cell and
//! repetition and scores it on one shared independent test set.
//! [`subsample_grid`] evaluates a single design of maximal size once and draws
//! every cell from it, scoring either on the left-over high-fidelity points or
//! on an independent test set.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::MultiFidelity;
use crate::doe::{lhs, mf_lhs, subsample, BiFidelityDoE, SampleSet};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, tag};
use crate::stats;
use crate::surrogate::{fit_hierarchical, mse_on_holdout};

pub const DEFAULT_TEST_SIZE_FACTOR: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "enumeration")]
    Enumeration,
    #[serde(rename = "subsample-external-test")]
    SubsampleExternalTest,
    #[serde(rename = "subsample-cv")]
    SubsampleCv,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Enumeration => "enumeration",
            Method::SubsampleExternalTest => "subsample-external-test",
            Method::SubsampleCv => "subsample-cv",
        }
    }

    /// Largest `n_high` row present in a grid built with maximum `n_high_max`.
    pub fn max_row(self, n_high_max: usize) -> usize {
        match self {
            Method::Enumeration => n_high_max,
            _ => n_high_max - 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumeration" => Ok(Method::Enumeration),
            "subsample-external-test" => Ok(Method::SubsampleExternalTest),
            "subsample-cv" => Ok(Method::SubsampleCv),
            other => Err(Error::Validation(format!("unknown grid method '{other}'"))),
        }
    }
}

/// How subsampled cells are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TestMode {
    /// Score on the high-fidelity points left out of the subsample.
    Cv,
    /// Score on an independent Latin hypercube of `test_size_factor * dim` points.
    External { test_size_factor: usize },
}

impl TestMode {
    pub fn method(self) -> Method {
        match self {
            TestMode::Cv => Method::SubsampleCv,
            TestMode::External { .. } => Method::SubsampleExternalTest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n_high_max: usize,
    pub n_low_max: usize,
    pub iterations: usize,
    pub seed: u64,
    pub test_size_factor: usize,
    /// Worker threads; 0 lets the thread pool pick.
    pub workers: usize,
}

impl GridConfig {
    pub fn new(n_high_max: usize, n_low_max: usize, iterations: usize, seed: u64) -> Self {
        Self { n_high_max, n_low_max, iterations, seed, test_size_factor: DEFAULT_TEST_SIZE_FACTOR, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_high_max < 2 {
            return Err(Error::precondition(format!("n_high_max must be >= 2, got {}", self.n_high_max)));
        }
        if self.n_low_max < self.n_high_max + 1 {
            return Err(Error::precondition(format!(
                "n_low_max must be >= n_high_max + 1, got {} and {}",
                self.n_low_max, self.n_high_max
            )));
        }
        if self.iterations < 1 {
            return Err(Error::precondition("iterations must be >= 1"));
        }
        if self.test_size_factor < 1 {
            return Err(Error::precondition("test_size_factor must be >= 1"));
        }
        Ok(())
    }
}

/// Identifies the experiment a grid belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub function: String,
    pub param_a: Option<f64>,
    pub method: Method,
    pub seed: u64,
}

impl GridMeta {
    /// Bitwise comparison, so NaN-free metadata read back from disk compares exactly.
    pub fn same_as(&self, other: &GridMeta) -> bool {
        self.function == other.function
            && self.param_a.map(f64::to_bits) == other.param_a.map(f64::to_bits)
            && self.method == other.method
            && self.seed == other.seed
    }
}

/// MSE values keyed by `(n_high, n_low)`, one entry per repetition.
/// Failed fits are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGrid {
    pub meta: GridMeta,
    pub cells: BTreeMap<(usize, usize), Vec<f64>>,
}

impl ErrorGrid {
    pub fn new(meta: GridMeta) -> Self {
        Self { meta, cells: BTreeMap::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of cell-repetitions, counting failed ones.
    pub fn n_values(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    pub fn iterations(&self) -> usize {
        self.cells.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn get(&self, n_high: usize, n_low: usize) -> Option<&[f64]> {
        self.cells.get(&(n_high, n_low)).map(Vec::as_slice)
    }

    pub fn n_failures(&self) -> usize {
        self.cells.values().flatten().filter(|v| !v.is_finite()).count()
    }

    /// Flat `(n_high, n_low, rep, mse)` view in cell order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.cells.iter().flat_map(|(&(h, l), v)| v.iter().enumerate().map(move |(i, &m)| (h, l, i, m)))
    }

    /// Keeps only cells with `n_high >= min_nh` and `n_low >= min_nl`.
    pub fn restricted(&self, min_nh: usize, min_nl: usize) -> ErrorGrid {
        ErrorGrid {
            meta: self.meta.clone(),
            cells: self.cells.iter().filter(|((h, l), _)| *h >= min_nh && *l >= min_nl).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }
}

/// The `(n_high, n_low)` index set of a grid, row by row.
pub fn cell_indices(method: Method, n_high_max: usize, n_low_max: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if n_high_max < 2 {
        return out;
    }
    for h in 2..=method.max_row(n_high_max) {
        for l in h + 1..=n_low_max {
            out.push((h, l));
        }
    }
    out
}

/// Exact number of cell-repetitions, `I * sum_h (n_low_max - h)`.
pub fn cell_count(method: Method, n_high_max: usize, n_low_max: usize, iterations: usize) -> usize {
    if n_high_max < 2 {
        return 0;
    }
    (2..=method.max_row(n_high_max)).map(|h| n_low_max.saturating_sub(h)).sum::<usize>() * iterations
}

/// Closed-form design count `I * n_high_max * (n_low_max - n_high_max / 2)`.
///
/// It exceeds [`cell_count`] for enumeration by exactly
/// `I * (n_low_max + n_high_max / 2 - 1)`, the contribution of the missing
/// `n_high = 1` row and of the half-cells on the diagonal.
pub fn analytic_design_count(n_high_max: usize, n_low_max: usize, iterations: usize) -> f64 {
    iterations as f64 * n_high_max as f64 * (n_low_max as f64 - n_high_max as f64 / 2.0)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::precondition(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn run_cells<P>(
    cells: &[(usize, usize)],
    cfg: &GridConfig,
    progress: &P,
    score: impl Fn(usize, usize, u64) -> Result<f64> + Sync,
) -> Result<BTreeMap<(usize, usize), Vec<f64>>>
where
    P: Fn(usize, usize) + Sync,
{
    let work: Vec<(usize, usize, usize)> =
        cells.iter().flat_map(|&(h, l)| (0..cfg.iterations).map(move |i| (h, l, i))).collect();
    let total = work.len();
    let done = AtomicUsize::new(0);
    let results: Vec<Result<f64>> = with_pool(cfg.workers, || {
        work.par_iter()
            .map(|&(h, l, i)| {
                let cell_seed = derive_seed(cfg.seed, &[tag::CELL, h as u64, l as u64, i as u64]);
                let r = match score(h, l, cell_seed) {
                    Err(e) if e.is_numerical() => Ok(f64::NAN),
                    other => other,
                };
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
                r
            })
            .collect()
    })?;
    let mut out: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (&(h, l, _), r) in work.iter().zip(results) {
        out.entry((h, l)).or_default().push(r?);
    }
    Ok(out)
}

fn meta_for<F: MultiFidelity + ?Sized>(f: &F, method: Method, seed: u64) -> GridMeta {
    GridMeta { function: f.name().to_string(), param_a: f.param_a(), method, seed }
}

fn external_test_set<F: MultiFidelity + ?Sized>(f: &F, factor: usize, seed: u64) -> Result<(SampleSet, Vec<f64>)> {
    let test = lhs(factor * f.dim(), f.bounds(), derive_seed(seed, &[tag::TEST_SET]))?;
    let y = test.points().iter().map(|x| f.high(x)).collect();
    Ok((test, y))
}

pub fn enumerate_grid<F: MultiFidelity + ?Sized>(f: &F, cfg: &GridConfig) -> Result<ErrorGrid> {
    enumerate_grid_with_progress(f, cfg, |_, _| {})
}

/// Full enumeration; `progress(done, total)` is called after every cell-repetition.
pub fn enumerate_grid_with_progress<F, P>(f: &F, cfg: &GridConfig, progress: P) -> Result<ErrorGrid>
where
    F: MultiFidelity + ?Sized,
    P: Fn(usize, usize) + Sync,
{
    cfg.validate()?;
    let (test, y_test) = external_test_set(f, cfg.test_size_factor, cfg.seed)?;
    let cells = cell_indices(Method::Enumeration, cfg.n_high_max, cfg.n_low_max);
    let values = run_cells(&cells, cfg, &progress, |h, l, s| {
        let doe = mf_lhs(h, l, f.bounds(), derive_seed(s, &[tag::INITIAL_DOE]))?.evaluate(f)?;
        let model = fit_hierarchical(&doe, derive_seed(s, &[tag::FIT]))?;
        mse_on_holdout(&model, &test, &y_test)
    })?;
    Ok(ErrorGrid { meta: meta_for(f, Method::Enumeration, cfg.seed), cells: values })
}

/// The single evaluated design a subsampling grid draws from.
pub fn initial_design<F: MultiFidelity + ?Sized>(f: &F, cfg: &GridConfig) -> Result<BiFidelityDoE> {
    cfg.validate()?;
    mf_lhs(cfg.n_high_max, cfg.n_low_max, f.bounds(), derive_seed(cfg.seed, &[tag::INITIAL_DOE]))?.evaluate(f)
}

pub fn subsample_grid<F: MultiFidelity + ?Sized>(f: &F, cfg: &GridConfig, mode: TestMode) -> Result<ErrorGrid> {
    subsample_grid_with_progress(f, cfg, mode, |_, _| {})
}

/// Subsampling grid: `f` is evaluated once on the initial design (plus the
/// external test set in [`TestMode::External`]) and never again.
pub fn subsample_grid_with_progress<F, P>(f: &F, cfg: &GridConfig, mode: TestMode, progress: P) -> Result<ErrorGrid>
where
    F: MultiFidelity + ?Sized,
    P: Fn(usize, usize) + Sync,
{
    let doe = initial_design(f, cfg)?;
    let external = match mode {
        TestMode::Cv => None,
        TestMode::External { test_size_factor } => {
            if test_size_factor < 1 {
                return Err(Error::precondition("test_size_factor must be >= 1"));
            }
            Some(external_test_set(f, test_size_factor, cfg.seed)?)
        }
    };
    let method = mode.method();
    let cells = cell_indices(method, cfg.n_high_max, cfg.n_low_max);
    let values = run_cells(&cells, cfg, &progress, |h, l, s| {
        let sub = subsample(&doe, h, l, derive_seed(s, &[tag::INITIAL_DOE]))?;
        let model = fit_hierarchical(&sub.doe, derive_seed(s, &[tag::FIT]))?;
        match &external {
            Some((test, y)) => mse_on_holdout(&model, test, y),
            None => {
                let y = sub.test_responses.as_deref().expect("initial design is evaluated");
                mse_on_holdout(&model, &sub.test_high, y)
            }
        }
    })?;
    Ok(ErrorGrid { meta: meta_for(f, method, cfg.seed), cells: values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianCell {
    /// `log10` of the median of the finite repetitions; NaN when invalid.
    pub log10_median: f64,
    pub failures: usize,
    pub repetitions: usize,
}

impl MedianCell {
    /// At least one repetition failed.
    pub fn flagged(&self) -> bool {
        self.failures > 0
    }

    pub fn valid(&self) -> bool {
        self.log10_median.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianGrid {
    pub meta: GridMeta,
    pub cells: BTreeMap<(usize, usize), MedianCell>,
}

impl MedianGrid {
    pub fn get(&self, n_high: usize, n_low: usize) -> Option<f64> {
        self.cells.get(&(n_high, n_low)).map(|c| c.log10_median)
    }
}

/// Per-cell median over repetitions, then `log10`.
///
/// Non-finite repetitions are skipped; a cell with at least half of its
/// repetitions failed, or with a non-positive median, is reported as NaN.
pub fn median_grid(grid: &ErrorGrid) -> MedianGrid {
    let cells = grid
        .cells
        .iter()
        .map(|(&k, v)| {
            let failures = v.iter().filter(|x| !x.is_finite()).count();
            let log10_median = match stats::median(v) {
                Some(m) if m > 0.0 && 2 * failures < v.len() => m.log10(),
                _ => f64::NAN,
            };
            (k, MedianCell { log10_median, failures, repetitions: v.len() })
        })
        .collect();
    MedianGrid { meta: grid.meta.clone(), cells }
}
