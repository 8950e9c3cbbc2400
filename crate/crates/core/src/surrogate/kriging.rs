use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;

use super::lbfgs::{self, Options};
use super::Predictor;
use crate::bounds::Bounds;
use crate::doe::SampleSet;
use crate::error::{Error, Result};
use crate::seed;

const SQRT5: f64 = 2.236_067_977_499_79;
const LOG_LS: (f64, f64) = (-4.605_170_185_988_091, 4.605_170_185_988_091); // ln 1e-2, ln 1e2
const LOG_VAR: (f64, f64) = (-9.210_340_371_976_182, 9.210_340_371_976_182); // ln 1e-4, ln 1e4
const NUGGET_START: f64 = 1e-10;
const NUGGET_MAX: f64 = 1e-2;
const RANDOM_STARTS: usize = 4;
const MIN_VARIANCE: f64 = 1e-14;

/// Matérn 5/2 correlation as a function of the scaled distance `r`.
#[inline]
pub(crate) fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Gaussian-process regression model with an anisotropic Matérn 5/2 kernel.
///
/// Inputs are mapped onto the unit cube of the sample bounds and targets are
/// standardised before fitting; predictions are returned in original units.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    bounds: Bounds,
    x: Vec<f64>,
    n: usize,
    dim: usize,
    length_scales: Vec<f64>,
    signal_variance: f64,
    nugget: f64,
    weights: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    y_mean: f64,
    y_scale: f64,
    log_likelihood: f64,
}

impl KrigingModel {
    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    /// Signal variance in standardised target units.
    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// Diagonal regularisation in standardised target units.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn n_train(&self) -> usize {
        self.n
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Cholesky factor of the regularised kernel matrix.
    pub fn factor(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }
}

impl Predictor for KrigingModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut u = vec![0.0; self.dim];
        self.bounds.to_unit_into(x, &mut u);
        let inv_ls: Vec<f64> = self.length_scales.iter().map(|l| 1.0 / l).collect();
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = &self.x[i * self.dim..(i + 1) * self.dim];
            let r2: f64 = row.iter().zip(&u).zip(&inv_ls).map(|((a, b), il)| ((a - b) * il).powi(2)).sum();
            acc += matern52(r2.sqrt()) * self.weights[i];
        }
        self.y_mean + self.y_scale * self.signal_variance * acc
    }
}

/// Pairwise squared coordinate differences, one `n x n` block per dimension.
struct Workspace {
    n: usize,
    dim: usize,
    sq: Vec<f64>,
    y: DVector<f64>,
}

struct Evaluation {
    nll: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl Workspace {
    fn new(x: &[f64], n: usize, dim: usize, y: DVector<f64>) -> Self {
        let mut sq = vec![0.0; dim * n * n];
        for k in 0..dim {
            for i in 0..n {
                for j in 0..n {
                    let d = x[i * dim + k] - x[j * dim + k];
                    sq[k * n * n + i * n + j] = d * d;
                }
            }
        }
        Self { n, dim, sq, y }
    }

    fn scaled_r(&self, inv_ls2: &[f64], i: usize, j: usize) -> f64 {
        let nn = self.n * self.n;
        (0..self.dim).map(|k| self.sq[k * nn + i * self.n + j] * inv_ls2[k]).sum::<f64>().sqrt()
    }

    fn evaluate(&self, theta: &[f64], nugget: f64) -> Option<Evaluation> {
        let n = self.n;
        let inv_ls2: Vec<f64> = theta[..self.dim].iter().map(|t| (-2.0 * t).exp()).collect();
        let var = theta[self.dim].exp();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = var + nugget;
            for j in 0..i {
                let v = var * matern52(self.scaled_r(&inv_ls2, i, j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let chol = Cholesky::new(k)?;
        let alpha = chol.solve(&self.y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let nll = 0.5 * self.y.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        nll.is_finite().then_some(Evaluation { nll, chol, alpha })
    }

    /// Negative log marginal likelihood and its gradient in log-parameters.
    fn nll_and_grad(&self, theta: &[f64], nugget: f64, grad: &mut [f64]) -> f64 {
        let Some(ev) = self.evaluate(theta, nugget) else {
            return f64::INFINITY;
        };
        let n = self.n;
        let nn = n * n;
        let inv_ls2: Vec<f64> = theta[..self.dim].iter().map(|t| (-2.0 * t).exp()).collect();
        let var = theta[self.dim].exp();
        // W = K^{-1} - alpha alpha^T; dNLL/dtheta = tr(W dK/dtheta) / 2.
        let mut w = ev.chol.inverse();
        w.ger(-1.0, &ev.alpha, &ev.alpha, 1.0);

        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut g_var = 0.5 * (0..n).map(|i| w[(i, i)]).sum::<f64>() * var;
        for i in 0..n {
            for j in 0..i {
                let wij = w[(i, j)];
                let r = self.scaled_r(&inv_ls2, i, j);
                let e = (-SQRT5 * r).exp();
                g_var += wij * var * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * e;
                let common = wij * var * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e;
                for k in 0..self.dim {
                    grad[k] += common * self.sq[k * nn + i * n + j] * inv_ls2[k];
                }
            }
        }
        grad[self.dim] = g_var;
        ev.nll
    }
}

fn has_duplicates(x: &[f64], n: usize, dim: usize) -> bool {
    let mut rows: Vec<&[f64]> = (0..n).map(|i| &x[i * dim..(i + 1) * dim]).collect();
    rows.sort_by(|a, b| a.iter().zip(b.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    rows.windows(2).any(|w| w[0] == w[1])
}

/// Fits a Kriging model by maximising the log marginal likelihood.
///
/// One deterministic start (all length-scales 0.5, unit variance) plus four
/// seeded random starts are refined with bounded L-BFGS. The nugget starts at
/// `1e-10` of the target variance and grows tenfold whenever no start yields a
/// positive definite kernel matrix, up to `1e-2`.
pub fn fit_kriging(x: &SampleSet, y: &[f64], seed: u64) -> Result<KrigingModel> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::precondition(format!("{} inputs but {} targets", n, y.len())));
    }
    if n < 2 {
        return Err(Error::precondition("kriging needs at least two training points"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("training targets must be finite"));
    }
    let dim = x.dim();
    let bounds = x.bounds().clone();
    let mut xs = vec![0.0; n * dim];
    for (i, p) in x.points().iter().enumerate() {
        bounds.to_unit_into(p, &mut xs[i * dim..(i + 1) * dim]);
    }
    if has_duplicates(&xs, n, dim) {
        return Err(Error::domain("kriging training inputs contain duplicates"));
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let constant = y_var < MIN_VARIANCE;
    let y_scale = if constant { 1.0 } else { y_var.sqrt() };
    let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
    let ws = Workspace::new(&xs, n, dim, ys);

    let lo: Vec<f64> = std::iter::repeat_n(LOG_LS.0, dim).chain([LOG_VAR.0]).collect();
    let hi: Vec<f64> = std::iter::repeat_n(LOG_LS.1, dim).chain([LOG_VAR.1]).collect();
    let mut starts = vec![std::iter::repeat_n(0.5_f64.ln(), dim).chain([0.0]).collect::<Vec<f64>>()];
    if !constant {
        let mut rng = seed::rng(seed);
        for _ in 0..RANDOM_STARTS {
            let mut s: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05_f64.ln()..2.0_f64.ln())).collect();
            s.push(rng.random_range(-1.0..1.0));
            starts.push(s);
        }
    }

    let opts = Options::default();
    let mut nugget = NUGGET_START;
    while nugget <= NUGGET_MAX * (1.0 + 1e-9) {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for s in &starts {
            let found = if constant {
                ws.evaluate(s, nugget).map(|ev| lbfgs::Minimum { x: s.clone(), f: ev.nll })
            } else {
                lbfgs::minimize(|t, g| ws.nll_and_grad(t, nugget, g), s, &lo, &hi, &opts)
            };
            if let Some(m) = found {
                if best.as_ref().is_none_or(|(f, _)| m.f < *f) {
                    best = Some((m.f, m.x));
                }
            }
        }
        if let Some((_, theta)) = best {
            if let Some(ev) = ws.evaluate(&theta, nugget) {
                return Ok(KrigingModel {
                    bounds,
                    x: xs,
                    n,
                    dim,
                    length_scales: theta[..dim].iter().map(|t| t.exp()).collect(),
                    signal_variance: theta[dim].exp(),
                    nugget,
                    weights: ev.alpha,
                    chol: ev.chol,
                    y_mean,
                    y_scale,
                    log_likelihood: -ev.nll,
                });
            }
        }
        nugget *= 10.0;
    }
    Err(Error::FitFailure(format!("kernel matrix not positive definite for {n} points even with nugget {NUGGET_MAX}")))
}
