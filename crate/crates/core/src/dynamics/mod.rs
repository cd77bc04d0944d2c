//! Scenario description and Euler–Maruyama simulation of the coupled
//! population and of its McKean–Vlasov limit.

mod benes_sim;
mod model;
mod simulate;

pub use benes_sim::{simulate_benes, BenesBundle};
pub use model::{mean_field_drift, ControlSet, Drift, FrozenDrift, InitialLaw, Observation, Scenario};
pub use simulate::{
    affine_feedback_mean_flow, consistent_flow, induced_flow, initial_filter, simulate_mckean_vlasov, simulate_population, SimOptions,
    TrajectoryBundle,
};
