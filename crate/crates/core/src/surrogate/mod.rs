//! Kriging regression and the additive hierarchical bi-fidelity model.

mod kriging;
mod lbfgs;

pub use kriging::{fit_kriging, KrigingModel};

use crate::benchmarks::MultiFidelity;
use crate::doe::{BiFidelityDoE, SampleSet};
use crate::error::{Error, Result};
use crate::seed;

/// Anything that maps an input point to a scalar prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> f64;

    fn predict_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// `z_h(x) = rho * z_l(x) + delta(x)` with `rho` fixed to one.
#[derive(Debug, Clone)]
pub struct HierarchicalSurrogate {
    pub low: KrigingModel,
    pub delta: KrigingModel,
    pub rho: f64,
}

impl Predictor for HierarchicalSurrogate {
    fn predict(&self, x: &[f64]) -> f64 {
        self.rho * self.low.predict(x) + self.delta.predict(x)
    }
}

/// Trains `z_l` on all low-fidelity pairs and `delta` on `y_h - y_l` at the
/// shared high-fidelity points.
pub fn fit_hierarchical(doe: &BiFidelityDoE, seed: u64) -> Result<HierarchicalSurrogate> {
    let (Some(yh), Some(yl)) = (doe.responses_high(), doe.responses_low()) else {
        return Err(Error::precondition("hierarchical fit needs responses for both fidelities"));
    };
    if doe.n_high() < 2 {
        return Err(Error::precondition("hierarchical fit needs at least two high-fidelity points"));
    }
    let low = fit_kriging(doe.low(), yl, seed::derive_seed(seed, &[seed::tag::FIT, 0]))?;
    let diff: Vec<f64> = yh.iter().zip(doe.high_index()).map(|(h, &j)| h - yl[j]).collect();
    let delta = fit_kriging(doe.high(), &diff, seed::derive_seed(seed, &[seed::tag::FIT, 1]))?;
    Ok(HierarchicalSurrogate { low, delta, rho: 1.0 })
}

/// Mean squared deviation from the high-fidelity function over `test`.
pub fn mse<P: Predictor + ?Sized, F: MultiFidelity + ?Sized>(model: &P, f: &F, test: &SampleSet) -> Result<f64> {
    let truth: Vec<f64> = test.points().iter().map(|x| f.high(x)).collect();
    mse_on_holdout(model, test, &truth)
}

/// Mean squared deviation from stored responses.
pub fn mse_on_holdout<P: Predictor + ?Sized>(model: &P, test: &SampleSet, y_test: &[f64]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain("test set is empty"));
    }
    if test.len() != y_test.len() {
        return Err(Error::precondition(format!("{} test points but {} responses", test.len(), y_test.len())));
    }
    let sum: f64 = test.points().iter().zip(y_test).map(|(x, y)| (model.predict(x) - y).powi(2)).sum();
    Ok(sum / test.len() as f64)
}
