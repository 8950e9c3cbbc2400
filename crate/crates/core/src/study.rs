//! Multi-case experiment drivers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_plane, FitOptions};
use crate::benchmarks::{estimate_correlation, MultiFidelityFunction};
use crate::error::Result;
use crate::errorgrid::{enumerate_grid, subsample_grid, GridConfig, TestMode};
use crate::io::fmt_f64;
use crate::seed::{derive_seed, tag};
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub function: String,
    pub param_a: Option<f64>,
}

impl Case {
    pub fn new(function: &str, param_a: Option<f64>) -> Self {
        Self { function: function.to_string(), param_a }
    }

    pub fn build(&self) -> Result<MultiFidelityFunction> {
        MultiFidelityFunction::new(&self.function, self.param_a)
    }

    pub fn label(&self) -> String {
        match self.param_a {
            Some(a) => format!("{}(A={a})", self.function),
            None => self.function.clone(),
        }
    }
}

/// The 21 adjustable cases used to compare subsampling with full enumeration.
pub fn default_comparison_cases() -> Vec<Case> {
    let steps = |name: &str, from: u32, to: u32| -> Vec<Case> {
        (from..=to).step_by(5).map(|c| Case::new(name, Some(c as f64 / 100.0))).collect()
    };
    let mut cases: Vec<Case> = [0.0, 0.05, 0.25].iter().map(|&a| Case::new("adjustable-branin", Some(a))).collect();
    cases.extend(steps("paciorek", 5, 25));
    cases.extend(steps("hartmann3", 20, 40));
    cases.extend(steps("trid", 65, 100));
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseComparison {
    pub case: Case,
    pub enumeration_theta: Option<f64>,
    pub external_thetas: Vec<f64>,
    pub cv_thetas: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cases: Vec<CaseComparison>,
    /// Pearson correlation over all (enumeration angle, subsampled angle) pairs.
    pub corr_external: Option<f64>,
    pub corr_cv: Option<f64>,
}

impl ComparisonReport {
    pub fn n_failed(&self) -> usize {
        self.cases.iter().filter(|c| c.error.is_some()).count()
    }

    fn pairs(&self, cv: bool) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in self.cases.iter().filter(|c| c.error.is_none()) {
            if let Some(e) = c.enumeration_theta {
                for &t in if cv { &c.cv_thetas } else { &c.external_thetas } {
                    xs.push(e);
                    ys.push(t);
                }
            }
        }
        (xs, ys)
    }

    /// `(enumeration, cv)` angle pairs, one per successful repetition.
    pub fn cv_pairs(&self) -> Vec<(f64, f64)> {
        let (x, y) = self.pairs(true);
        x.into_iter().zip(y).collect()
    }

    pub fn external_pairs(&self) -> Vec<(f64, f64)> {
        let (x, y) = self.pairs(false);
        x.into_iter().zip(y).collect()
    }
}

/// Seed of the `r`-th subsampling repetition.
pub fn repeat_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, &[tag::INITIAL_DOE, r as u64])
}

fn compare_case(case: &Case, cfg: &GridConfig, repeats: usize, external_factor: usize) -> Result<CaseComparison> {
    let f = case.build()?;
    let opts = FitOptions::default();
    let enumeration_theta = fit_plane(&enumerate_grid(&f, cfg)?, &opts)?.theta_deg;
    let mut external_thetas = Vec::with_capacity(repeats);
    let mut cv_thetas = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let sub_cfg = GridConfig { seed: repeat_seed(cfg.seed, r), ..cfg.clone() };
        let ext = subsample_grid(&f, &sub_cfg, TestMode::External { test_size_factor: external_factor })?;
        external_thetas.push(fit_plane(&ext, &opts)?.theta_deg);
        let cv = subsample_grid(&f, &sub_cfg, TestMode::Cv)?;
        cv_thetas.push(fit_plane(&cv, &opts)?.theta_deg);
    }
    Ok(CaseComparison {
        case: case.clone(),
        enumeration_theta: Some(enumeration_theta),
        external_thetas,
        cv_thetas,
        error: None,
    })
}

/// Full enumeration once per case plus `repeats` subsampling runs in both test
/// modes. Failing cases are recorded and skipped.
pub fn compare_subsampling(
    cases: &[Case],
    cfg: &GridConfig,
    repeats: usize,
    on_case: &dyn Fn(usize, &CaseComparison),
) -> ComparisonReport {
    let mut out = Vec::with_capacity(cases.len());
    for (i, case) in cases.iter().enumerate() {
        let result = compare_case(case, cfg, repeats, cfg.test_size_factor).unwrap_or_else(|e| CaseComparison {
            case: case.clone(),
            enumeration_theta: None,
            external_thetas: Vec::new(),
            cv_thetas: Vec::new(),
            error: Some(e.to_string()),
        });
        on_case(i, &result);
        out.push(result);
    }
    let mut report = ComparisonReport { cases: out, corr_external: None, corr_cv: None };
    let (x, y) = report.pairs(false);
    report.corr_external = pearson(&x, &y);
    let (x, y) = report.pairs(true);
    report.corr_cv = pearson(&x, &y);
    report
}

/// Per-case angles as CSV: `function,A,method,repeat,theta_deg`.
pub fn write_comparison_to<W: Write>(out: W, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "A", "method", "repeat", "theta_deg"])?;
    for c in &report.cases {
        let a = c.case.param_a.map(fmt_f64).unwrap_or_default();
        if let Some(t) = c.enumeration_theta {
            w.write_record([c.case.function.as_str(), &a, "enumeration", "", &fmt_f64(t)])?;
        }
        for (method, thetas) in [("subsample-external-test", &c.external_thetas), ("subsample-cv", &c.cv_thetas)] {
            for (r, t) in thetas.iter().enumerate() {
                w.write_record([c.case.function.as_str(), &a, method, &r.to_string(), &fmt_f64(*t)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    pub case: Case,
    pub r: f64,
    pub theta_deg: f64,
    pub ci: Option<[f64; 2]>,
}

pub const CORRELATION_SAMPLES: usize = 2000;

pub fn angle_vs_correlation_case(case: &Case, cfg: &GridConfig) -> Result<AngleRow> {
    let f = case.build()?;
    let r = estimate_correlation(&f, CORRELATION_SAMPLES, derive_seed(cfg.seed, &[tag::CORRELATION]))?;
    let fit = fit_plane(&enumerate_grid(&f, cfg)?, &FitOptions::default())?;
    Ok(AngleRow { case: case.clone(), r, theta_deg: fit.theta_deg, ci: fit.theta_ci_deg })
}

/// Correlation and enumeration angle per case; each entry is independent.
pub fn angle_vs_correlation(
    cases: &[Case],
    cfg: &GridConfig,
    on_case: &dyn Fn(usize, &Result<AngleRow>),
) -> Vec<(Case, Result<AngleRow>)> {
    cases
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let row = angle_vs_correlation_case(c, cfg);
            on_case(i, &row);
            (c.clone(), row)
        })
        .collect()
}

/// CSV `function,A,r,theta_deg,ci_low,ci_high`; failed cases keep their
/// identifiers with empty values.
pub fn write_angle_rows_to<W: Write>(out: W, rows: &[(Case, Result<AngleRow>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "A", "r", "theta_deg", "ci_low", "ci_high"])?;
    for (case, row) in rows {
        let a = case.param_a.map(fmt_f64).unwrap_or_default();
        let fields = match row {
            Ok(r) => {
                let (lo, hi) = r.ci.map(|[l, h]| (fmt_f64(l), fmt_f64(h))).unwrap_or_default();
                [fmt_f64(r.r), fmt_f64(r.theta_deg), lo, hi]
            }
            Err(_) => Default::default(),
        };
        w.write_record([case.function.clone(), a].into_iter().chain(fields))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_case_table() {
        let cases = default_comparison_cases();
        assert_eq!(cases.len(), 21);
        let count = |n: &str| cases.iter().filter(|c| c.function == n).count();
        assert_eq!((count("adjustable-branin"), count("paciorek"), count("hartmann3"), count("trid")), (3, 5, 5, 8));
        assert_eq!(cases.last().unwrap().param_a, Some(1.0));
        assert!(cases.iter().all(|c| c.build().is_ok()));
    }
}
