//! Projected limited-memory BFGS for simple box constraints.

pub(crate) struct Options {
    pub memory: usize,
    pub max_iter: usize,
    pub pgtol: f64,
    pub ftol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self { memory: 8, max_iter: 200, pgtol: 1e-6, ftol: 1e-10 }
    }
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_grad_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((xi, gi), (l, h))| (xi - gi).clamp(*l, *h) - xi)
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Minimises `f` over `[lo, hi]` starting from `x0`.
///
/// `f` returns the objective and writes the gradient into its second argument;
/// a non-finite objective marks an infeasible point and makes the line search
/// backtrack. Returns `None` if the start itself is infeasible.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &Options) -> Option<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }

    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut d = vec![0.0; n];

    for _ in 0..opts.max_iter {
        if projected_grad_norm(&x, &g, lo, hi) < opts.pgtol {
            break;
        }

        // Variables sitting on a bound with the gradient pushing outwards stay fixed.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();

        // Two-loop recursion on the free subspace.
        d.iter_mut().zip(&g).zip(&free).for_each(|((di, gi), fr)| *di = if *fr { -gi } else { 0.0 });
        let m = s_hist.len();
        let mut a = vec![0.0; m];
        for k in (0..m).rev() {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            a[k] = rho * dot(&s_hist[k], &d);
            for i in 0..n {
                d[i] -= a[k] * y_hist[k][i];
            }
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for k in 0..m {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            let b = rho * dot(&y_hist[k], &d);
            for i in 0..n {
                d[i] += s_hist[k][i] * (a[k] - b);
            }
        }
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            d.iter_mut().zip(&g).zip(&free).for_each(|((di, gi), fr)| *di = if *fr { -gi } else { 0.0 });
        }

        let dnorm = dot(&d, &d).sqrt();
        let mut t = if s_hist.is_empty() { (1.0 / dnorm).min(1.0) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            project(&mut x_new, lo, hi);
            let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && g_new.iter().all(|v| v.is_finite()) && f_new <= fx + 1e-4 * decrease {
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&step, &y) > 1e-12 * dot(&y, &y).max(1e-300) {
                    if s_hist.len() == opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(step);
                    y_hist.push(y);
                }
                let rel = (fx - f_new).abs() / fx.abs().max(f_new.abs()).max(1.0);
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                accepted = true;
                if rel < opts.ftol {
                    return Some(Minimum { x, f: fx });
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(Minimum { x, f: fx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let opts = Options { max_iter: 2000, ..Default::default() };
        let m = minimize(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn active_bound() {
        // Minimum of (x - 3)^2 + (y + 1)^2 on [0, 2] x [0, 2] is (2, 0).
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] + 1.0);
            (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
        };
        let m = minimize(f, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 2.0], &Options::default()).unwrap();
        assert_eq!(m.x, vec![2.0, 0.0]);
        assert!((m.f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_start() {
        let f = |_: &[f64], _: &mut [f64]| f64::NAN;
        assert!(minimize(f, &[0.0], &[-1.0], &[1.0], &Options::default()).is_none());
    }
}
