use std::collections::BTreeSet;

use mfgrid::benchmarks::CountingFunction;
use mfgrid::errorgrid::{analytic_design_count, cell_count, cell_indices, initial_design};
use mfgrid::{
    enumerate_grid, median_grid, subsample, subsample_grid, Error, GridConfig, Method, MultiFidelityFunction,
    TestMode,
};
use rand::{Rng, SeedableRng};

fn booth() -> MultiFidelityFunction {
    MultiFidelityFunction::new("booth", None).unwrap()
}

fn small(n_h: usize, n_l: usize, iters: usize) -> GridConfig {
    GridConfig { test_size_factor: 20, ..GridConfig::new(n_h, n_l, iters, 13) }
}

fn loop_oracle(h_max: usize, l_max: usize) -> BTreeSet<(usize, usize)> {
    let mut s = BTreeSet::new();
    let mut h = 2;
    while h <= h_max {
        let mut l = h + 1;
        while l <= l_max {
            s.insert((h, l));
            l += 1;
        }
        h += 1;
    }
    s
}

#[test]
fn enumeration_cells_follow_loop_bounds() {
    let g = enumerate_grid(&booth(), &small(2, 3, 1)).unwrap();
    assert_eq!(g.cells.keys().copied().collect::<Vec<_>>(), vec![(2, 3)]);
    let g = enumerate_grid(&booth(), &small(3, 5, 2)).unwrap();
    let keys: BTreeSet<_> = g.cells.keys().copied().collect();
    assert_eq!(keys, [(2, 3), (2, 4), (2, 5), (3, 4), (3, 5)].into_iter().collect());
    assert_eq!(g.n_values(), 10);
    assert!(g.cells.values().flatten().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn index_sets_match_oracle() {
    for (h, l) in [(2, 3), (3, 5), (7, 19), (15, 40), (50, 125)] {
        let enumerated: BTreeSet<_> = cell_indices(Method::Enumeration, h, l).into_iter().collect();
        assert_eq!(enumerated, loop_oracle(h, l));
        let sub: BTreeSet<_> = cell_indices(Method::SubsampleCv, h, l).into_iter().collect();
        assert_eq!(sub, loop_oracle(h - 1, l));
        assert_eq!(cell_count(Method::Enumeration, h, l, 3), 3 * loop_oracle(h, l).len());
    }
    assert_eq!(analytic_design_count(50, 125, 50), 250_000.0);
}

#[test]
fn reproducible_and_worker_independent() {
    let f = MultiFidelityFunction::new("currin", None).unwrap();
    let cfg = small(4, 7, 2);
    let a = enumerate_grid(&f, &cfg).unwrap();
    let b = enumerate_grid(&f, &cfg.clone().with_workers(3)).unwrap();
    let bits = |g: &mfgrid::ErrorGrid| g.entries().map(|e| (e.0, e.1, e.2, e.3.to_bits())).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = subsample_grid(&f, &cfg, TestMode::Cv).unwrap();
    let d = subsample_grid(&f, &cfg.clone().with_workers(2), TestMode::Cv).unwrap();
    assert_eq!(bits(&c), bits(&d));
    let e = enumerate_grid(&f, &GridConfig { seed: 14, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&e));
}

#[test]
fn subsampling_evaluates_once() {
    let f = booth();
    for iters in [1, 3] {
        let counted = CountingFunction::new(&f);
        let cfg = small(6, 12, iters);
        let g = subsample_grid(&counted, &cfg, TestMode::Cv).unwrap();
        assert_eq!((counted.high_calls(), counted.low_calls()), (6, 12));
        assert_eq!(g.cells.keys().map(|k| k.0).max(), Some(5));
        assert_eq!(g.meta.method, Method::SubsampleCv);

        let counted = CountingFunction::new(&f);
        subsample_grid(&counted, &cfg, TestMode::External { test_size_factor: 10 }).unwrap();
        assert_eq!((counted.high_calls(), counted.low_calls()), (6 + 20, 12));
    }
}

#[test]
fn last_cv_cell_scores_single_point() {
    let f = booth();
    let cfg = small(5, 9, 1);
    let doe = initial_design(&f, &cfg).unwrap();
    let s = subsample(&doe, 4, 9, 0).unwrap();
    assert_eq!(s.test_high.len(), 1);
    let g = subsample_grid(&f, &cfg, TestMode::Cv).unwrap();
    assert!(g.get(4, 9).is_some());
}

#[test]
fn invalid_sizes_rejected() {
    let f = booth();
    assert!(matches!(enumerate_grid(&f, &small(1, 3, 1)), Err(Error::Precondition(_))));
    assert!(matches!(enumerate_grid(&f, &small(4, 4, 1)), Err(Error::Precondition(_))));
    assert!(matches!(subsample_grid(&f, &small(3, 5, 0), TestMode::Cv), Err(Error::Precondition(_))));
}

#[test]
fn median_matches_sort_oracle() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let f = booth();
    let mut g = enumerate_grid(&f, &small(2, 3, 1)).unwrap();
    g.cells.clear();
    for h in 2..6 {
        for l in h + 1..9 {
            let n = rng.random_range(1..8);
            g.cells.insert((h, l), (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect());
        }
    }
    let m = median_grid(&g);
    for (k, v) in &g.cells {
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if s.len() % 2 == 1 { s[s.len() / 2] } else { (s[s.len() / 2 - 1] + s[s.len() / 2]) / 2.0 };
        assert_eq!(m.get(k.0, k.1), Some(med.log10()));
    }
}

#[test]
fn median_single_repetition_and_arithmetic() {
    let mut g = enumerate_grid(&booth(), &small(2, 3, 1)).unwrap();
    let single = g.get(2, 3).unwrap()[0];
    assert_eq!(median_grid(&g).get(2, 3), Some(single.log10()));
    g.cells.insert((2, 3), vec![1.0, 10.0, 100.0]);
    assert_eq!(median_grid(&g).get(2, 3), Some(1.0));
}
