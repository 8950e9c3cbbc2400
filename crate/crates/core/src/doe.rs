//! Latin hypercube samples and nested bi-fidelity designs.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::benchmarks::MultiFidelity;
use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::seed;

/// An ordered set of distinct points inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    bounds: Bounds,
}

impl SampleSet {
    /// Validates dimensionality, bounds and distinctness.
    pub fn new(points: Vec<Vec<f64>>, bounds: Bounds) -> Result<Self> {
        for p in &points {
            bounds.check(p)?;
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| {
            a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("sample set contains duplicate points"));
        }
        Ok(Self { points, bounds })
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Vec<f64>>, bounds: Bounds) -> Self {
        Self { points, bounds }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points picked by index, in the order given.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet { points: indices.iter().map(|&i| self.points[i].clone()).collect(), bounds: self.bounds.clone() }
    }
}

/// Nested design `H ⊂ L` with optional responses.
///
/// `high_index[i]` is the position of `high[i]` inside `low`; the points at
/// those positions are bit-identical copies.
#[derive(Debug, Clone, PartialEq)]
pub struct BiFidelityDoE {
    high: SampleSet,
    low: SampleSet,
    high_index: Vec<usize>,
    responses_high: Option<Vec<f64>>,
    responses_low: Option<Vec<f64>>,
}

impl BiFidelityDoE {
    /// Builds a design from explicit sets, locating every high point in `low`
    /// by exact equality.
    pub fn new(high: SampleSet, low: SampleSet) -> Result<Self> {
        if high.bounds() != low.bounds() {
            return Err(Error::domain("high and low sets use different bounds"));
        }
        if low.len() < high.len() + 1 {
            return Err(Error::precondition(format!(
                "need n_low >= n_high + 1, got n_high = {}, n_low = {}",
                high.len(),
                low.len()
            )));
        }
        let high_index = high
            .points()
            .iter()
            .map(|h| {
                low.points()
                    .iter()
                    .position(|l| l == h)
                    .ok_or_else(|| Error::domain(format!("high point {h:?} is not part of the low set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { high, low, high_index, responses_high: None, responses_low: None })
    }

    pub fn high(&self) -> &SampleSet {
        &self.high
    }

    pub fn low(&self) -> &SampleSet {
        &self.low
    }

    pub fn n_high(&self) -> usize {
        self.high.len()
    }

    pub fn n_low(&self) -> usize {
        self.low.len()
    }

    pub fn high_index(&self) -> &[usize] {
        &self.high_index
    }

    pub fn responses_high(&self) -> Option<&[f64]> {
        self.responses_high.as_deref()
    }

    pub fn responses_low(&self) -> Option<&[f64]> {
        self.responses_low.as_deref()
    }

    pub fn is_evaluated(&self) -> bool {
        self.responses_high.is_some() && self.responses_low.is_some()
    }

    pub fn with_responses(mut self, high: Vec<f64>, low: Vec<f64>) -> Result<Self> {
        if high.len() != self.n_high() || low.len() != self.n_low() {
            return Err(Error::precondition(format!(
                "response lengths ({}, {}) do not match design sizes ({}, {})",
                high.len(),
                low.len(),
                self.n_high(),
                self.n_low()
            )));
        }
        self.responses_high = Some(high);
        self.responses_low = Some(low);
        Ok(self)
    }

    /// Evaluates `f_h` on `H` and `f_l` on `L`, exactly once per point.
    pub fn evaluate<F: MultiFidelity + ?Sized>(self, f: &F) -> Result<Self> {
        if f.bounds() != self.high.bounds() {
            return Err(Error::domain(format!("design bounds do not match '{}'", f.name())));
        }
        let yh = self.high.points().iter().map(|x| f.high(x)).collect();
        let yl = self.low.points().iter().map(|x| f.low(x)).collect();
        self.with_responses(yh, yl)
    }

    /// Low-fidelity responses at the high-fidelity points.
    pub fn low_at_high(&self) -> Option<Vec<f64>> {
        self.responses_low.as_ref().map(|yl| self.high_index.iter().map(|&j| yl[j]).collect())
    }
}

/// Random-permutation Latin hypercube: one point per equal-width stratum in
/// every dimension, placed uniformly inside its stratum.
pub fn lhs(n: usize, bounds: &Bounds, seed: u64) -> Result<SampleSet> {
    let mut rng = seed::rng(seed);
    lhs_with(n, bounds, &mut rng)
}

fn lhs_with(n: usize, bounds: &Bounds, rng: &mut seed::Rng) -> Result<SampleSet> {
    if n < 1 {
        return Err(Error::domain("a Latin hypercube needs at least one point"));
    }
    let dim = bounds.dim();
    let mut points = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        let (lo, hi) = (bounds.lower()[d], bounds.upper()[d]);
        let width = hi - lo;
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let mut v = lo + width * (stratum as f64 + u) / n as f64;
            // Rounding must not push a value into the next stratum.
            let next = lo + width * (stratum + 1) as f64 / n as f64;
            if v >= next && stratum + 1 < n {
                v = next.next_down();
            }
            points[i][d] = v.clamp(lo, hi);
        }
    }
    Ok(SampleSet::from_parts_unchecked(points, bounds.clone()))
}

/// Nested bi-fidelity Latin hypercube.
///
/// Two independent samples of sizes `n_high` and `n_low` are drawn. The
/// closest remaining (high, low) pair is matched repeatedly and the low point
/// is overwritten in place by its high partner, until every high point has a
/// slot in the low set. Ties go to the lexicographically smallest
/// (high index, low index).
pub fn mf_lhs(n_high: usize, n_low: usize, bounds: &Bounds, seed: u64) -> Result<BiFidelityDoE> {
    if n_high < 1 {
        return Err(Error::precondition("n_high must be at least 1"));
    }
    if n_low < n_high + 1 {
        return Err(Error::precondition(format!("need n_low >= n_high + 1, got n_high = {n_high}, n_low = {n_low}")));
    }
    let mut rng = seed::rng(seed);
    let high = lhs_with(n_high, bounds, &mut rng)?;
    let low = lhs_with(n_low, bounds, &mut rng)?;

    let dist: Vec<f64> = high
        .points()
        .iter()
        .flat_map(|h| {
            low.points().iter().map(move |l| h.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .collect();

    let mut high_used = vec![false; n_high];
    let mut low_used = vec![false; n_low];
    let mut high_index = vec![0usize; n_high];
    for _ in 0..n_high {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for i in (0..n_high).filter(|&i| !high_used[i]) {
            let row = &dist[i * n_low..(i + 1) * n_low];
            for j in (0..n_low).filter(|&j| !low_used[j]) {
                if row[j] < best.0 {
                    best = (row[j], i, j);
                }
            }
        }
        let (_, i, j) = best;
        high_used[i] = true;
        low_used[j] = true;
        high_index[i] = j;
    }

    let mut low_points = low.points;
    for (i, &j) in high_index.iter().enumerate() {
        low_points[j] = high.points()[i].clone();
    }
    Ok(BiFidelityDoE {
        low: SampleSet::from_parts_unchecked(low_points, bounds.clone()),
        high,
        high_index,
        responses_high: None,
        responses_low: None,
    })
}

/// Result of drawing a smaller nested design out of an existing one.
#[derive(Debug, Clone)]
pub struct Subsample {
    pub doe: BiFidelityDoE,
    /// The left-over high-fidelity points `H ∖ H'`.
    pub test_high: SampleSet,
    /// Stored high-fidelity responses at `test_high`, when the source design
    /// was evaluated.
    pub test_responses: Option<Vec<f64>>,
    /// Positions of `H'` inside the source `H`.
    pub selected_high: Vec<usize>,
    /// Positions of `L'` inside the source `L`.
    pub selected_low: Vec<usize>,
}

/// Checks the size constraints of [`subsample`] without drawing anything.
pub fn subsample_admissible(n_high_src: usize, n_low_src: usize, n_high: usize, n_low: usize) -> bool {
    n_high >= 2 && n_high < n_high_src && n_low > n_high && n_low - n_high <= n_low_src - n_high
}

/// Draws `H'` uniformly without replacement from `H`, then fills `L'` with
/// `H'` plus uniformly drawn points from `L ∖ H'`. Responses are copied from
/// the source design; nothing is re-evaluated.
pub fn subsample(doe: &BiFidelityDoE, n_high: usize, n_low: usize, seed: u64) -> Result<Subsample> {
    if !subsample_admissible(doe.n_high(), doe.n_low(), n_high, n_low) {
        return Err(Error::precondition(format!(
            "cannot subsample ({n_high}, {n_low}) from a ({}, {}) design: need 2 <= n_high' < {} and \
             n_high' + 1 <= n_low' <= {}",
            doe.n_high(),
            doe.n_low(),
            doe.n_high(),
            doe.n_low()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut selected_high = sample_indices(&mut rng, doe.n_high(), n_high).into_vec();
    selected_high.sort_unstable();

    let mut in_h_prime = vec![false; doe.n_low()];
    for &i in &selected_high {
        in_h_prime[doe.high_index[i]] = true;
    }
    let pool: Vec<usize> = (0..doe.n_low()).filter(|&j| !in_h_prime[j]).collect();
    let mut extra: Vec<usize> =
        sample_indices(&mut rng, pool.len(), n_low - n_high).into_iter().map(|k| pool[k]).collect();
    extra.sort_unstable();

    // L' lists H' first so the nesting index is simply 0..n_high.
    let selected_low: Vec<usize> = selected_high.iter().map(|&i| doe.high_index[i]).chain(extra).collect();
    let test_idx: Vec<usize> = (0..doe.n_high()).filter(|i| selected_high.binary_search(i).is_err()).collect();

    let high = doe.high.select(&selected_high);
    let low = doe.low.select(&selected_low);
    let responses_high = doe.responses_high.as_ref().map(|y| selected_high.iter().map(|&i| y[i]).collect());
    let responses_low = doe.responses_low.as_ref().map(|y| selected_low.iter().map(|&j| y[j]).collect());
    let test_responses = doe.responses_high.as_ref().map(|y| test_idx.iter().map(|&i| y[i]).collect());

    Ok(Subsample {
        doe: BiFidelityDoE { high, low, high_index: (0..n_high).collect(), responses_high, responses_low },
        test_high: doe.high.select(&test_idx),
        test_responses,
        selected_high,
        selected_low,
    })
}
