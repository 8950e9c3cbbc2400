//! Analytic bi-fidelity benchmark problems.
//!
//! Fixed problems follow the classical multi-fidelity surrogate literature
//! (Forrester et al. 2007; Dong et al. 2015; Xiong et al. 2013; Currin et al.
//! 1991). The four adjustable problems carry a parameter `A` in `[0, 1]` that
//! tunes how well the low-fidelity function tracks the high-fidelity one
//! (Toal 2015). Every function is evaluated in natural coordinates.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::bounds::Bounds;
use crate::doe::lhs;
use crate::error::{Error, Result};
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    High,
    Low,
}

/// A pair of deterministic scalar functions over a box.
pub trait MultiFidelity: Sync {
    fn name(&self) -> &str;
    fn bounds(&self) -> &Bounds;
    fn param_a(&self) -> Option<f64>;

    /// High-fidelity response; `x` is assumed to be inside the bounds.
    fn high(&self, x: &[f64]) -> f64;
    /// Low-fidelity response; `x` is assumed to be inside the bounds.
    fn low(&self, x: &[f64]) -> f64;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Checked evaluation.
    fn evaluate(&self, fidelity: Fidelity, x: &[f64]) -> Result<f64> {
        self.bounds().check(x)?;
        Ok(match fidelity {
            Fidelity::High => self.high(x),
            Fidelity::Low => self.low(x),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Forrester,
    Booth,
    Branin,
    Currin,
    Bohachevsky,
    SixHumpCamelback,
    Park91a,
    Borehole,
    AdjustableBranin,
    Paciorek,
    Hartmann3,
    Trid,
}

const KINDS: [Kind; 12] = [
    Kind::AdjustableBranin,
    Kind::Bohachevsky,
    Kind::Booth,
    Kind::Borehole,
    Kind::Branin,
    Kind::Currin,
    Kind::Forrester,
    Kind::Hartmann3,
    Kind::Paciorek,
    Kind::Park91a,
    Kind::SixHumpCamelback,
    Kind::Trid,
];

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Forrester => "forrester",
            Kind::Booth => "booth",
            Kind::Branin => "branin",
            Kind::Currin => "currin",
            Kind::Bohachevsky => "bohachevsky",
            Kind::SixHumpCamelback => "six-hump-camelback",
            Kind::Park91a => "park91a",
            Kind::Borehole => "borehole",
            Kind::AdjustableBranin => "adjustable-branin",
            Kind::Paciorek => "paciorek",
            Kind::Hartmann3 => "hartmann3",
            Kind::Trid => "trid",
        }
    }

    fn adjustable(self) -> bool {
        matches!(self, Kind::AdjustableBranin | Kind::Paciorek | Kind::Hartmann3 | Kind::Trid)
    }

    fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            Kind::Forrester => vec![(0.0, 1.0)],
            Kind::Booth => vec![(-10.0, 10.0); 2],
            Kind::Branin | Kind::AdjustableBranin => vec![(-5.0, 10.0), (0.0, 15.0)],
            Kind::Currin => vec![(0.0, 1.0); 2],
            Kind::Bohachevsky => vec![(-5.0, 5.0); 2],
            Kind::SixHumpCamelback => vec![(-2.0, 2.0); 2],
            Kind::Park91a => vec![(0.0, 1.0); 4],
            Kind::Borehole => vec![
                (0.05, 0.15),
                (100.0, 50_000.0),
                (63_070.0, 115_600.0),
                (990.0, 1110.0),
                (63.1, 116.0),
                (700.0, 820.0),
                (1120.0, 1680.0),
                (9855.0, 12_045.0),
            ],
            Kind::Paciorek => vec![(0.3, 1.0); 2],
            Kind::Hartmann3 => vec![(0.0, 1.0); 3],
            Kind::Trid => vec![(-100.0, 100.0); 10],
        }
    }
}

/// One entry of the benchmark catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub adjustable: bool,
}

/// Catalog of all benchmark problems, sorted by name.
pub fn list_functions() -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = KINDS
        .iter()
        .map(|k| {
            let bounds = k.bounds();
            CatalogEntry { name: k.name(), dim: bounds.len(), bounds, adjustable: k.adjustable() }
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(b.name));
    out
}

/// A named benchmark problem, optionally with its adjustment parameter.
#[derive(Debug, Clone)]
pub struct MultiFidelityFunction {
    kind: Kind,
    bounds: Bounds,
    param_a: Option<f64>,
}

impl MultiFidelityFunction {
    /// Looks a function up by catalog name. Adjustable functions require
    /// `param_a` in `[0, 1]`; fixed functions reject it.
    pub fn new(name: &str, param_a: Option<f64>) -> Result<Self> {
        let kind = KINDS
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::domain(format!("unknown benchmark function '{name}'")))?;
        match (kind.adjustable(), param_a) {
            (true, None) => {
                return Err(Error::domain(format!("'{name}' is adjustable and needs a parameter A in [0, 1]")))
            }
            (true, Some(a)) if !(0.0..=1.0).contains(&a) => {
                return Err(Error::domain(format!("parameter A = {a} is outside [0, 1]")))
            }
            (false, Some(_)) => return Err(Error::domain(format!("'{name}' does not take a parameter A"))),
            _ => {}
        }
        let bounds = Bounds::from_pairs(&kind.bounds())?;
        Ok(Self { kind, bounds, param_a })
    }

    pub fn is_adjustable(&self) -> bool {
        self.kind.adjustable()
    }

    fn a(&self) -> f64 {
        self.param_a.unwrap_or(0.0)
    }
}

impl MultiFidelity for MultiFidelityFunction {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn param_a(&self) -> Option<f64> {
        self.param_a
    }

    fn high(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Forrester => forrester_high(x[0]),
            Kind::Booth => booth_high(x[0], x[1]),
            Kind::Branin => branin_base(x[0], x[1]) - 22.5 * x[1],
            Kind::AdjustableBranin => branin_base(x[0], x[1]),
            Kind::Currin => currin_high(x[0], x[1]),
            Kind::Bohachevsky => bohachevsky_high(x[0], x[1]),
            Kind::SixHumpCamelback => six_hump_high(x[0], x[1]),
            Kind::Park91a => park91a_high(x),
            Kind::Borehole => borehole(x, 2.0 * PI, 1.0),
            Kind::Paciorek => (1.0 / (x[0] * x[1])).sin(),
            Kind::Hartmann3 => hartmann3_high(x),
            Kind::Trid => trid_high(x),
        }
    }

    fn low(&self, x: &[f64]) -> f64 {
        match self.kind {
            // 0.5 f_h(x) + 10 (x - 0.5) - 5
            Kind::Forrester => 0.5 * forrester_high(x[0]) + 10.0 * (x[0] - 0.5) - 5.0,
            // f_h(0.4 x1, x2) + 1.7 x1 x2 - x1 + 2 x2
            Kind::Booth => booth_high(0.4 * x[0], x[1]) + 1.7 * x[0] * x[1] - x[0] + 2.0 * x[1],
            Kind::Branin => branin_low(x[0], x[1]),
            Kind::Currin => currin_low(x[0], x[1]),
            // f_h(0.7 x1, x2) + x1 x2 - 12
            Kind::Bohachevsky => bohachevsky_high(0.7 * x[0], x[1]) + x[0] * x[1] - 12.0,
            // f_h(0.7 x1, 0.7 x2) + x1 x2 - 15
            Kind::SixHumpCamelback => six_hump_high(0.7 * x[0], 0.7 * x[1]) + x[0] * x[1] - 15.0,
            Kind::Park91a => park91a_low(x),
            Kind::Borehole => borehole(x, 5.0, 1.5),
            Kind::AdjustableBranin => adjustable_branin_low(x[0], x[1], self.a()),
            Kind::Paciorek => {
                let u = 1.0 / (x[0] * x[1]);
                u.sin() - 9.0 * self.a() * self.a() * u.cos()
            }
            Kind::Hartmann3 => hartmann3_low(x, self.a()),
            Kind::Trid => trid_low(x, self.a()),
        }
    }
}

// Forrester et al. (2007), 1D on [0, 1].
fn forrester_high(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

// Booth, 2D on [-10, 10]^2; low fidelity from Dong et al. (2015).
fn booth_high(x1: f64, x2: f64) -> f64 {
    (x1 + 2.0 * x2 - 7.0).powi(2) + (2.0 * x1 + x2 - 5.0).powi(2)
}

fn branin_quadratic(x1: f64, x2: f64) -> f64 {
    (x2 - 5.1 / (4.0 * PI * PI) * x1 * x1 + 5.0 / PI * x1 - 6.0).powi(2)
}

// Branin on [-5, 10] x [0, 15].
fn branin_base(x1: f64, x2: f64) -> f64 {
    branin_quadratic(x1, x2) + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x1.cos() + 10.0
}

// Dong et al. (2015): f_h = branin(x) - 22.5 x2,
// f_l = branin(0.7 x) - 15.75 x2 + 20 (0.9 + x1)^2 - 50.
fn branin_low(x1: f64, x2: f64) -> f64 {
    branin_base(0.7 * x1, 0.7 * x2) - 15.75 * x2 + 20.0 * (0.9 + x1).powi(2) - 50.0
}

// Toal (2015): f_l = f_h - (A + 0.5) * (x2 - 5.1 x1^2 / (4 pi^2) + 5 x1 / pi - 6)^2
fn adjustable_branin_low(x1: f64, x2: f64, a: f64) -> f64 {
    branin_base(x1, x2) - (a + 0.5) * branin_quadratic(x1, x2)
}

// Currin et al. (1991), 2D on [0, 1]^2. At x2 = 0 the exponential factor is 1.
fn currin_high(x1: f64, x2: f64) -> f64 {
    let factor = 1.0 - (-1.0 / (2.0 * x2)).exp();
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    factor * num / den
}

// Average of four shifted high-fidelity evaluations, x2 - 0.05 clipped at 0.
fn currin_low(x1: f64, x2: f64) -> f64 {
    let down = (x2 - 0.05).max(0.0);
    0.25 * (currin_high(x1 + 0.05, x2 + 0.05)
        + currin_high(x1 + 0.05, down)
        + currin_high(x1 - 0.05, x2 + 0.05)
        + currin_high(x1 - 0.05, down))
}

fn bohachevsky_high(x1: f64, x2: f64) -> f64 {
    x1 * x1 + 2.0 * x2 * x2 - 0.3 * (3.0 * PI * x1).cos() - 0.4 * (4.0 * PI * x2).cos() + 0.7
}

fn six_hump_high(x1: f64, x2: f64) -> f64 {
    let x1sq = x1 * x1;
    4.0 * x1sq - 2.1 * x1sq * x1sq + x1sq.powi(3) / 3.0 + x1 * x2 - 4.0 * x2 * x2 + 4.0 * x2.powi(4)
}

// Park (1991) as used by Xiong et al. (2013), [0, 1]^4.
// The first term has the finite limit sqrt((x2 + x3^2) x4) / 2 as x1 -> 0.
fn park91a_high(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let c = (x2 + x3 * x3) * x4;
    let first = if x1 == 0.0 { 0.5 * c.sqrt() } else { 0.5 * x1 * ((1.0 + c / (x1 * x1)).sqrt() - 1.0) };
    first + (x1 + 3.0 * x4) * (1.0 + x3.sin()).exp()
}

fn park91a_low(x: &[f64]) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    (1.0 + x1.sin() / 10.0) * park91a_high(x) - 2.0 * x1 + x2 * x2 + x3 * x3 + 0.5
}

// Borehole water flow (Morris et al. 1993); the low fidelity of Xiong et al.
// (2013) replaces 2*pi by 5 and the leading 1 of the denominator by 1.5.
fn borehole(x: &[f64], scale: f64, offset: f64) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let log_ratio = (r / rw).ln();
    scale * tu * (hu - hl) / (log_ratio * (offset + 2.0 * l * tu / (log_ratio * rw * rw * kw) + tu / tl))
}

const H3_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const H3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

// Squared distance to centre i, with the centres scaled by `shift`.
fn hartmann3_inner(x: &[f64], i: usize, shift: f64) -> f64 {
    (0..3).map(|j| H3_A[i][j] * (x[j] - shift * H3_P[i][j]).powi(2)).sum()
}

fn hartmann3_sum(x: &[f64], shift: f64) -> f64 {
    -(0..4).map(|i| H3_ALPHA[i] * (-hartmann3_inner(x, i, shift)).exp()).sum::<f64>()
}

fn hartmann3_high(x: &[f64]) -> f64 {
    hartmann3_sum(x, 1.0)
}

// Toal (2015): the low fidelity moves every centre to 3/4 (A + 1) P_i,
// so both fidelities coincide at A = 1/3.
fn hartmann3_low(x: &[f64], a: f64) -> f64 {
    hartmann3_sum(x, 0.75 * (a + 1.0))
}

// Trid, 10D on [-100, 100]^10:
//   f_h = sum (x_i - 1)^2 - sum_{i>=2} x_i x_{i-1}
//   f_l = sum (x_i - A)^2 - (A - 0.65) sum_{i>=2} i x_i x_{i-1}    (Toal 2015)
fn trid_high(x: &[f64]) -> f64 {
    let squares: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
    let cross: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    squares - cross
}

fn trid_low(x: &[f64], a: f64) -> f64 {
    let squares: f64 = x.iter().map(|v| (v - a).powi(2)).sum();
    // 1-based index i of the later element in each adjacent pair.
    let cross: f64 = x.windows(2).enumerate().map(|(k, w)| (k + 2) as f64 * w[0] * w[1]).sum();
    squares - (a - 0.65) * cross
}

/// Pearson correlation between `f_h` and `f_l` over one Latin hypercube
/// sample of size `n_samples`.
pub fn estimate_correlation<F: MultiFidelity + ?Sized>(f: &F, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples < 3 {
        return Err(Error::precondition(format!("need at least 3 samples, got {n_samples}")));
    }
    let sample = lhs(n_samples, f.bounds(), seed)?;
    let high: Vec<f64> = sample.points().iter().map(|x| f.high(x)).collect();
    let low: Vec<f64> = sample.points().iter().map(|x| f.low(x)).collect();
    pearson(&high, &low).ok_or_else(|| {
        Error::UndefinedCorrelation(format!("zero response variance for '{}' over {n_samples} samples", f.name()))
    })
}

/// Wraps a problem and counts evaluations per fidelity.
pub struct CountingFunction<'a, F: MultiFidelity + ?Sized> {
    inner: &'a F,
    high_calls: AtomicUsize,
    low_calls: AtomicUsize,
}

impl<'a, F: MultiFidelity + ?Sized> CountingFunction<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Self { inner, high_calls: AtomicUsize::new(0), low_calls: AtomicUsize::new(0) }
    }

    pub fn high_calls(&self) -> usize {
        self.high_calls.load(Ordering::Relaxed)
    }

    pub fn low_calls(&self) -> usize {
        self.low_calls.load(Ordering::Relaxed)
    }
}

impl<F: MultiFidelity + ?Sized> MultiFidelity for CountingFunction<'_, F> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn bounds(&self) -> &Bounds {
        self.inner.bounds()
    }

    fn param_a(&self) -> Option<f64> {
        self.inner.param_a()
    }

    fn high(&self, x: &[f64]) -> f64 {
        self.high_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.high(x)
    }

    fn low(&self, x: &[f64]) -> f64 {
        self.low_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.low(x)
    }
}
