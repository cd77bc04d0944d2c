//! Measures, measure flows and the truncated Wasserstein metrics on them.
//!
//! A [`Measure`] is either a weighted particle list or a density sampled on a
//! uniform grid. Distances always use the cost `|x − y| ∧ 1`, so every value
//! lies in `[0, 1]`.

mod assignment;
mod flow;
mod measure;
mod paths;

pub use assignment::{assignment_cost, solve_assignment};
pub use flow::{holder_check, sup_marginal_distance, HolderReport, MeasureFlow, TestFunction};
pub use measure::{empirical_measure, marginal_distance, Measure, EXACT_ASSIGNMENT_THRESHOLD};
pub use paths::{path_distance_dt, PathEnsemble};
