//! Running costs, Hamiltonian minimisation, the sufficient-statistic HJB
//! solver and Monte Carlo cost evaluation.

mod cost;
mod evaluate;
mod hamiltonian;
mod hjb;
mod policy;

pub use cost::{CostForm, StateCost};
pub(crate) use evaluate::benes_population_costs;
pub use evaluate::{evaluate_benes_policy_cost, evaluate_policy_cost, CostEstimate, CostMode};
pub use hamiltonian::{argmin_tie_break, hamiltonian, minimize_hamiltonian, GRID_SEARCH_POINTS};
pub use hjb::{
    evaluate_policy_dp, solve_hjb_sufficient_stats, solve_hjb_with_field, Axis, FieldMoments, HjbGrid, PolicyTable,
    ValueTable,
};
pub use policy::{
    AffineDeviation, ConstantPolicy, MeanFeedback, Policy, SeparatedPolicy, StatsDeviation, StatsPolicy, ZeroPolicy,
};
