//! Error grids for bi-fidelity surrogate models.
//!
//! The crate measures how the accuracy of an additive hierarchical Kriging
//! surrogate changes with the number of high- and low-fidelity training
//! samples, summarises that behaviour by a fitted gradient direction, and
//! turns the direction into a recommendation for spending additional
//! evaluation budget.
//!
//! Pipeline:
//!
//! * [`benchmarks`]: analytic bi-fidelity test problems
//! * [`doe`]: Latin hypercube and nested bi-fidelity designs
//! * [`surrogate`]: Matérn 5/2 Kriging and the additive hierarchical model
//! * [`errorgrid`]: full-enumeration and subsampled error grids
//! * [`analysis`]: plane fit, gradient angle, confidence interval, budget split
//! * [`io`]: CSV/JSON persistence
//! * [`study`]: multi-case experiment drivers

pub mod analysis;
pub mod benchmarks;
pub mod bounds;
pub mod doe;
pub mod error;
pub mod errorgrid;
pub mod io;
pub mod seed;
pub mod stats;
pub mod study;
pub mod surrogate;

pub use analysis::{
    angle_ci, budget_split, extrapolation_report, fit_plane, BudgetSplit, CostModel, FitOn,
    FitOptions, GradientFit, SplitStatus,
};
pub use benchmarks::{estimate_correlation, list_functions, Fidelity, MultiFidelity, MultiFidelityFunction};
pub use bounds::Bounds;
pub use doe::{lhs, mf_lhs, subsample, BiFidelityDoE, SampleSet};
pub use error::{Error, Result};
pub use errorgrid::{enumerate_grid, median_grid, subsample_grid, ErrorGrid, GridConfig, Method, TestMode};
pub use surrogate::{fit_hierarchical, fit_kriging, mse, mse_on_holdout, HierarchicalSurrogate, KrigingModel, Predictor};
