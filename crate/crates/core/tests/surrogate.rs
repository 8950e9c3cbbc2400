use mfgrid::surrogate::Predictor;
use mfgrid::{
    fit_hierarchical, fit_kriging, lhs, mf_lhs, mse, mse_on_holdout, Bounds, Error, MultiFidelity,
    MultiFidelityFunction, SampleSet,
};

fn forrester() -> MultiFidelityFunction {
    MultiFidelityFunction::new("forrester", None).unwrap()
}

fn line(xs: &[f64]) -> SampleSet {
    SampleSet::new(xs.iter().map(|v| vec![*v]).collect(), Bounds::unit(1)).unwrap()
}

#[test]
fn forrester_beats_constant_predictor() {
    let f = forrester();
    let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    let y: Vec<f64> = xs.iter().map(|x| f.high(&[*x])).collect();
    let model = fit_kriging(&line(&xs), &y, 1).unwrap();
    let dense = line(&(0..=1000).map(|i| i as f64 / 1000.0).collect::<Vec<_>>());
    let truth: Vec<f64> = dense.points().iter().map(|p| f.high(p)).collect();
    let model_mse = mse_on_holdout(&model, &dense, &truth).unwrap();
    // Best constant on the dense grid is its mean; its MSE is the variance.
    let m = truth.iter().sum::<f64>() / truth.len() as f64;
    let const_mse = truth.iter().map(|t| (t - m).powi(2)).sum::<f64>() / truth.len() as f64;
    assert!(model_mse < const_mse, "{model_mse} vs {const_mse}");
}

#[test]
fn interpolates_training_points() {
    let pts = lhs(20, &Bounds::from_pairs(&[(-5.0, 10.0), (0.0, 15.0)]).unwrap(), 4).unwrap();
    let f = MultiFidelityFunction::new("branin", None).unwrap();
    let y: Vec<f64> = pts.points().iter().map(|p| f.high(p)).collect();
    let model = fit_kriging(&pts, &y, 2).unwrap();
    assert!(model.nugget() <= 1e-8);
    let scale = model.target_scale();
    for (p, t) in pts.points().iter().zip(&y) {
        assert!((model.predict(p) - t).abs() <= 1e-5 * scale, "{} vs {t}", model.predict(p));
    }
}

#[test]
fn shift_invariance() {
    let pts = lhs(12, &Bounds::unit(2), 8).unwrap();
    let y: Vec<f64> = pts.points().iter().map(|p| (4.0 * p[0]).sin() * p[1]).collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 1000.0).collect();
    let a = fit_kriging(&pts, &y, 0).unwrap();
    let b = fit_kriging(&pts, &shifted, 0).unwrap();
    for x in lhs(25, &Bounds::unit(2), 9).unwrap().points() {
        let (pa, pb) = (a.predict(x) + 1000.0, b.predict(x));
        assert!((pa - pb).abs() <= 1e-8 * pb.abs(), "{pa} vs {pb}");
    }
}

fn evaluated(f: &MultiFidelityFunction, n_h: usize, n_l: usize, seed: u64) -> mfgrid::BiFidelityDoE {
    mf_lhs(n_h, n_l, f.bounds(), seed).unwrap().evaluate(f).unwrap()
}

#[test]
fn hierarchical_is_additive() {
    let f = MultiFidelityFunction::new("currin", None).unwrap();
    let doe = evaluated(&f, 6, 15, 3);
    let m = fit_hierarchical(&doe, 5).unwrap();
    assert_eq!(m.rho, 1.0);
    assert_eq!(m.delta.n_train(), 6);
    assert_eq!(m.low.n_train(), 15);
    for x in lhs(30, f.bounds(), 1).unwrap().points() {
        assert_eq!(m.predict(x).to_bits(), (m.low.predict(x) + m.delta.predict(x)).to_bits());
    }
}

/// Both fidelities are the same function.
struct Same(MultiFidelityFunction);

impl MultiFidelity for Same {
    fn name(&self) -> &str {
        "same"
    }
    fn bounds(&self) -> &Bounds {
        self.0.bounds()
    }
    fn param_a(&self) -> Option<f64> {
        None
    }
    fn high(&self, x: &[f64]) -> f64 {
        self.0.high(x)
    }
    fn low(&self, x: &[f64]) -> f64 {
        self.0.high(x)
    }
}

#[test]
fn identical_fidelities_give_zero_correction() {
    let f = Same(MultiFidelityFunction::new("booth", None).unwrap());
    let doe = mf_lhs(5, 12, f.bounds(), 2).unwrap().evaluate(&f).unwrap();
    let m = fit_hierarchical(&doe, 0).unwrap();
    for x in lhs(20, f.bounds(), 3).unwrap().points() {
        assert!((m.predict(x) - m.low.predict(x)).abs() < 1e-6);
    }
}

#[test]
fn minimal_sizes_fit() {
    let f = MultiFidelityFunction::new("park91a", None).unwrap();
    let doe = evaluated(&f, 2, 3, 0);
    fit_hierarchical(&doe, 0).unwrap();
}

#[test]
fn missing_responses_rejected() {
    let f = forrester();
    let doe = mf_lhs(3, 6, f.bounds(), 0).unwrap();
    assert!(matches!(fit_hierarchical(&doe, 0), Err(Error::Precondition(_))));
}

#[test]
fn mse_matches_loop_oracle_and_is_order_free() {
    let f = MultiFidelityFunction::new("borehole", None).unwrap();
    let doe = evaluated(&f, 8, 20, 6);
    let m = fit_hierarchical(&doe, 6).unwrap();
    let test = lhs(200, f.bounds(), 7).unwrap();
    let got = mse(&m, &f, &test).unwrap();
    let mut acc = 0.0;
    for p in test.points() {
        let e = m.predict(p) - f.high(p);
        acc += e * e;
    }
    let oracle = acc / test.len() as f64;
    assert!((got - oracle).abs() <= 1e-12 * oracle);

    let rev: Vec<usize> = (0..test.len()).rev().collect();
    let permuted = test.select(&rev);
    let got_rev = mse(&m, &f, &permuted).unwrap();
    assert!((got - got_rev).abs() <= 1e-12 * got);

    let y: Vec<f64> = test.points().iter().map(|p| f.high(p)).collect();
    assert_eq!(mse_on_holdout(&m, &test, &y).unwrap(), got);
}

#[test]
fn mse_closed_forms() {
    struct Constant(f64);
    impl Predictor for Constant {
        fn predict(&self, _: &[f64]) -> f64 {
            self.0
        }
    }
    let test = line(&[0.1, 0.5, 0.9]);
    assert_eq!(mse_on_holdout(&Constant(3.0), &test, &[1.0, 1.0, 1.0]).unwrap(), 4.0);
    assert_eq!(mse_on_holdout(&Constant(3.0), &test, &[3.0, 3.0, 3.0]).unwrap(), 0.0);
    assert_eq!(mse_on_holdout(&Constant(2.5), &line(&[0.4]), &[1.0]).unwrap(), 2.25);
    let empty = SampleSet::new(vec![], Bounds::unit(1)).unwrap();
    assert!(matches!(mse_on_holdout(&Constant(0.0), &empty, &[]), Err(Error::Domain(_))));
}
