//! Numerical laboratory for partially observed mean field games.
//!
//! Each agent of a large population observes its own state through a noisy
//! channel, runs a nonlinear filter, and applies a separated feedback control
//! that depends only on its filter state and on the population's measure flow.
//! The crate provides the pieces needed to build, solve and audit such games:
//!
//! - [`measure_flow`]: measures, measure flows, the truncated Wasserstein
//!   metrics used to compare them, and Hölder regularity checks.
//! - [`dynamics`]: Euler–Maruyama simulation of the coupled N-agent system and
//!   of its McKean–Vlasov limit, driven by common random numbers.
//! - [`filtering`]: grid Zakai/Kushner solvers, a Girsanov-weighted particle
//!   filter, Kalman–Bucy oracles and the finite-dimensional Beneš-type filter.
//! - [`control`]: Hamiltonian minimisation, the HJB solver on the
//!   sufficient-statistic reduction, policies and cost evaluation.
//! - [`mfg`]: the Nash certainty equivalence fixed-point loop and gain
//!   constant estimation.
//! - [`nash`]: Monte Carlo audits of the McKean–Vlasov approximation rate and
//!   of the ε-Nash property.
//! - [`cli`]: configuration parsing and the experiment runner behind the
//!   `pomfg` binary.

// `!(x > y)` guards are kept so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod filtering;
pub mod measure_flow;
pub mod mfg;
pub mod nash;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
