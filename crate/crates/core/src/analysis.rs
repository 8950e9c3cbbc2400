//! Plane fit of `log10(MSE)` over design sizes, gradient angle, and budget split.
//!
//! The fitted model is `log10(MSE) = alpha + beta_h * n_h + beta_l * n_l`.
//! The angle is measured in the `(n_l, n_h)` plane along the direction of
//! decreasing error: `theta = atan2(-beta_h, -beta_l)`, so 0° means only
//! low-fidelity samples help, 90° means only high-fidelity samples help and
//! values above 90° mean extra low-fidelity samples hurt.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::errorgrid::{median_grid, ErrorGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitOn {
    /// Every finite cell-repetition is one observation.
    #[default]
    All,
    /// One observation per cell: the `log10` of the median MSE.
    Medians,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_nh: usize,
    pub min_nl: usize,
    pub fit_on: FitOn,
    pub confidence: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_nh: 0, min_nl: 0, fit_on: FitOn::All, confidence: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientFit {
    pub alpha: f64,
    pub beta_h: f64,
    pub beta_l: f64,
    pub theta_deg: f64,
    /// `None` when either slope is zero.
    pub theta_ci_deg: Option<[f64; 2]>,
    pub se_beta_h: f64,
    pub se_beta_l: f64,
    pub sse: f64,
    pub n_points: usize,
    pub df: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_ci_propagated_deg: Option<[f64; 2]>,
}

/// Number of fitted parameters.
const N_PARAMS: usize = 3;

/// Gradient angle in degrees for the given slopes.
pub fn theta_from_slopes(beta_h: f64, beta_l: f64) -> f64 {
    (-beta_h).atan2(-beta_l).to_degrees()
}

/// Observations `(n_h, n_l, log10 mse)` used by [`fit_plane`].
pub fn observations(grid: &ErrorGrid, opts: &FitOptions) -> Vec<(f64, f64, f64)> {
    let keep = |h: usize, l: usize| h >= opts.min_nh && l >= opts.min_nl;
    match opts.fit_on {
        FitOn::All => grid
            .entries()
            .filter(|&(h, l, _, m)| keep(h, l) && m.is_finite() && m > 0.0)
            .map(|(h, l, _, m)| (h as f64, l as f64, m.log10()))
            .collect(),
        FitOn::Medians => median_grid(grid)
            .cells
            .into_iter()
            .filter(|((h, l), c)| keep(*h, *l) && c.valid())
            .map(|((h, l), c)| (h as f64, l as f64, c.log10_median))
            .collect(),
    }
}

/// Ordinary least squares plane through `(n_h, n_l, y)` observations.
pub fn fit_observations(obs: &[(f64, f64, f64)], confidence: f64) -> Result<GradientFit> {
    let n = obs.len();
    let mut cells: Vec<(u64, u64)> = obs.iter().map(|o| (o.0.to_bits(), o.1.to_bits())).collect();
    cells.sort_unstable();
    cells.dedup();
    if cells.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 distinct cells, got {}", cells.len())));
    }
    if n <= N_PARAMS {
        return Err(Error::DegenerateFit(format!("need more than {N_PARAMS} observations for standard errors, got {n}")));
    }
    let nf = n as f64;
    let mh = obs.iter().map(|o| o.0).sum::<f64>() / nf;
    let ml = obs.iter().map(|o| o.1).sum::<f64>() / nf;
    let my = obs.iter().map(|o| o.2).sum::<f64>() / nf;
    let (mut shh, mut sll, mut shl, mut shy, mut sly) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(h, l, y) in obs {
        let (dh, dl, dy) = (h - mh, l - ml, y - my);
        shh += dh * dh;
        sll += dl * dl;
        shl += dh * dl;
        shy += dh * dy;
        sly += dl * dy;
    }
    let det = shh * sll - shl * shl;
    if shh <= 0.0 || sll <= 0.0 || det <= 1e-12 * shh * sll {
        return Err(Error::DegenerateFit("n_high and n_low are collinear or constant over the fit region".into()));
    }
    let beta_h = (sll * shy - shl * sly) / det;
    let beta_l = (shh * sly - shl * shy) / det;
    let alpha = my - beta_h * mh - beta_l * ml;
    let sse: f64 = obs.iter().map(|&(h, l, y)| (y - alpha - beta_h * h - beta_l * l).powi(2)).sum();
    let s = (sse / (n - N_PARAMS) as f64).sqrt();
    let mut fit = GradientFit {
        alpha,
        beta_h,
        beta_l,
        theta_deg: theta_from_slopes(beta_h, beta_l),
        theta_ci_deg: None,
        se_beta_h: s / shh.sqrt(),
        se_beta_l: s / sll.sqrt(),
        sse,
        n_points: n,
        df: N_PARAMS,
        theta_ci_propagated_deg: None,
    };
    fit.theta_ci_deg = angle_ci(&fit, confidence).ok().map(|(a, b)| [a, b]);
    Ok(fit)
}

pub fn fit_plane(grid: &ErrorGrid, opts: &FitOptions) -> Result<GradientFit> {
    fit_observations(&observations(grid, opts), opts.confidence)
}

fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::precondition(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    if confidence == 0.95 {
        return Ok(1.96);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

fn ci_with(fit: &GradientFit, confidence: f64, propagate: bool) -> Result<(f64, f64)> {
    let (bh, bl) = (fit.beta_h, fit.beta_l);
    if bh == 0.0 || bl == 0.0 {
        return Err(Error::CiUndefined(format!("slopes must be nonzero, got beta_h = {bh}, beta_l = {bl}")));
    }
    let slope = bh / bl;
    let mut hw = z_value(confidence)? * ((fit.se_beta_h / bh).powi(2) + (fit.se_beta_l / bl).powi(2)).sqrt();
    if propagate {
        hw *= slope.abs();
    }
    if !hw.is_finite() {
        return Err(Error::CiUndefined("standard errors are not finite".into()));
    }
    // atan covers (-90°, 90°); shift onto the branch of theta.
    let theta = theta_from_slopes(bh, bl);
    let offset = ((theta - slope.atan().to_degrees()) / 180.0).round() * 180.0;
    Ok(((slope - hw).atan().to_degrees() + offset, (slope + hw).atan().to_degrees() + offset))
}

/// Angle interval from the slope-ratio interval
/// `beta_h / beta_l ± z * sqrt((se_h / beta_h)^2 + (se_l / beta_l)^2)`.
pub fn angle_ci(fit: &GradientFit, confidence: f64) -> Result<(f64, f64)> {
    ci_with(fit, confidence, false)
}

/// First-order propagated variant: the half-width is additionally scaled by `|beta_h / beta_l|`.
pub fn angle_ci_propagated(fit: &GradientFit, confidence: f64) -> Result<(f64, f64)> {
    ci_with(fit, confidence, true)
}

/// Cost ratio `phi = c_l / c_h` and extra budget `b` in high-fidelity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub phi: f64,
    pub budget: f64,
}

impl CostModel {
    pub fn new(phi: f64, budget: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::precondition(format!("phi must lie in (0, 1), got {phi}")));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::precondition(format!("budget must be positive, got {budget}")));
        }
        Ok(Self { phi, budget })
    }

    pub fn cost(&self, n_high: f64, n_low: f64) -> f64 {
        n_high + self.phi * n_low
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStatus {
    /// Both slopes are non-positive: the error decreases along the split.
    Ok,
    /// At least one slope is positive; the extrapolation is not trustworthy.
    Unreliable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub delta_n_h: f64,
    pub delta_n_l: f64,
    pub rounded: (usize, usize),
    pub angle_deg: f64,
    pub status: SplitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<(usize, usize)>,
}

impl BudgetSplit {
    pub fn with_initial(mut self, n_high: usize, n_low: usize) -> Self {
        self.initial = Some((n_high, n_low));
        self.total = Some((n_high + self.rounded.0, n_low + self.rounded.1));
        self
    }
}

const BUDGET_EPS: f64 = 1e-9;

/// Largest integer low-fidelity count affordable after spending `n_high`.
fn max_low(n_high: usize, cost: &CostModel) -> usize {
    let rest = cost.budget - n_high as f64;
    if rest < 0.0 {
        return 0;
    }
    let mut l = (rest / cost.phi + BUDGET_EPS).floor() as usize;
    while l > 0 && cost.cost(n_high as f64, l as f64) > cost.budget + BUDGET_EPS {
        l -= 1;
    }
    l
}

/// Integer version of a real split: round `delta_n_h` to nearest (halves go
/// up), then take as many low-fidelity samples as the remaining budget allows.
pub fn round_split(delta_n_h: f64, cost: &CostModel) -> (usize, usize) {
    let cap = (cost.budget + BUDGET_EPS).floor() as usize;
    let h = (delta_n_h.max(0.0).round() as usize).min(cap);
    (h, max_low(h, cost))
}

/// `delta_n_l = b beta_l / (beta_h + phi beta_l)`, `delta_n_h = b beta_h / (beta_h + phi beta_l)`.
///
/// With opposite signs the formula can go negative; the whole budget then goes
/// to the fidelity whose slope is negative and the result is marked unreliable.
pub fn budget_split_from_slopes(beta_h: f64, beta_l: f64, cost: &CostModel) -> Result<BudgetSplit> {
    let (b, phi) = (cost.budget, cost.phi);
    let den = beta_h + phi * beta_l;
    let scale = beta_h.abs().max(beta_l.abs());
    if !den.is_finite() || scale == 0.0 || den.abs() < 1e-12 * scale {
        return Err(Error::DegenerateDirection(format!(
            "beta_h + phi * beta_l = {den} is zero for beta_h = {beta_h}, beta_l = {beta_l}, phi = {phi}"
        )));
    }
    let status = if beta_h <= 0.0 && beta_l <= 0.0 { SplitStatus::Ok } else { SplitStatus::Unreliable };
    let (dh, dl) = if beta_l == 0.0 {
        (b, 0.0)
    } else if beta_h == 0.0 {
        (0.0, b / phi)
    } else if beta_h * beta_l < 0.0 {
        if beta_h < 0.0 {
            (b, 0.0)
        } else {
            (0.0, b / phi)
        }
    } else {
        (b * beta_h / den, b * beta_l / den)
    };
    Ok(BudgetSplit {
        delta_n_h: dh,
        delta_n_l: dl,
        rounded: round_split(dh, cost),
        angle_deg: dh.atan2(dl).to_degrees(),
        status,
        initial: None,
        total: None,
    })
}

pub fn budget_split(fit: &GradientFit, cost: &CostModel) -> Result<BudgetSplit> {
    budget_split_from_slopes(fit.beta_h, fit.beta_l, cost)
}

/// Integer points on the budget line: for every `delta_n_h` in `0..=floor(b)`,
/// the largest affordable `delta_n_l`.
pub fn budget_candidates(cost: &CostModel) -> Vec<(usize, usize)> {
    let cap = (cost.budget + BUDGET_EPS).floor() as usize;
    (0..=cap).map(|h| (h, max_low(h, cost))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    pub delta_n_h: usize,
    pub delta_n_l: usize,
    pub angle_deg: f64,
    pub median_log10_mse: f64,
    pub is_predicted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationReport {
    pub initial: (usize, usize),
    pub split: BudgetSplit,
    /// Budget-line candidates by increasing angle, followed by the predicted split.
    pub rows: Vec<ExtrapolationRow>,
}

/// Median `log10(MSE)` along the budget line starting at `initial`, next to
/// the split recommended by `fit`.
pub fn extrapolation_report(
    grid: &ErrorGrid,
    fit: &GradientFit,
    initial: (usize, usize),
    cost: &CostModel,
) -> Result<ExtrapolationReport> {
    let split = budget_split(fit, cost)?.with_initial(initial.0, initial.1);
    let medians = median_grid(grid);
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let candidates = budget_candidates(cost).into_iter().map(|c| (c, false)).chain([(split.rounded, true)]);
    for ((dh, dl), is_predicted) in candidates {
        let cell = (initial.0 + dh, initial.1 + dl);
        let Some(value) = medians.get(cell.0, cell.1) else {
            if !missing.contains(&cell) {
                missing.push(cell);
            }
            continue;
        };
        let angle_deg = if is_predicted { split.angle_deg } else { (dh as f64).atan2(dl as f64).to_degrees() };
        rows.push(ExtrapolationRow { delta_n_h: dh, delta_n_l: dl, angle_deg, median_log10_mse: value, is_predicted });
    }
    if !missing.is_empty() {
        return Err(Error::Coverage { cells: missing });
    }
    Ok(ExtrapolationReport { initial, split, rows })
}
