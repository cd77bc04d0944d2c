use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_benes, simulate_mckean_vlasov, simulate_population, Scenario, SimOptions};
use crate::error::{Error, Result};
use crate::filtering::{BenesMode, BenesModel};
use crate::measure_flow::MeasureFlow;
use crate::rng::derive_seed;
use crate::stats;

use super::hjb::FieldMoments;
use super::policy::{Policy, StatsPolicy};

/// Which system the cost is measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostMode {
    /// Independent copies driven by a frozen flow.
    Mv,
    /// `n` agents coupled through their empirical measure.
    Population { n: usize },
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl CostEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        CostEstimate {
            mean: stats::mean(xs),
            std_error: if xs.len() > 1 { stats::std_error(xs) } else { 0.0 },
            samples: xs.len(),
        }
    }
}

fn population_seeds(seed: u64, reps: usize) -> impl Iterator<Item = u64> {
    (0..reps as u64).map(move |r| derive_seed(seed, &[r]))
}

/// Expected running cost `E ∫ L dt` (left-point sums) along closed-loop
/// paths. In MV mode `m` is the number of paths and `flow` is required; in
/// population mode `m` is the number of independent replications of the
/// `n`-agent system, replication `r` using seed `derive_seed(seed, [r])`, and
/// the standard error is taken across replication means.
pub fn evaluate_policy_cost(
    scenario: &Scenario,
    policy: &dyn Policy,
    flow: Option<&MeasureFlow>,
    m: usize,
    which: CostMode,
    opts: &SimOptions,
) -> Result<CostEstimate> {
    if m == 0 {
        return Err(Error::invalid("need at least one path or replication"));
    }
    let dt = scenario.dt;
    match which {
        CostMode::Mv => {
            let flow = flow.ok_or_else(|| Error::invalid("MV cost evaluation needs a flow"))?;
            let b = simulate_mckean_vlasov(scenario, policy, flow, m, opts)?;
            let steps = b.times.len() - 1;
            let per_path: Vec<f64> = (0..b.len())
                .map(|i| {
                    (0..steps)
                        .map(|k| scenario.cost.running(b.states[i][k], b.controls[i][k], &flow.measures()[k]) * dt)
                        .sum()
                })
                .collect();
            Ok(CostEstimate::from_samples(&per_path))
        }
        CostMode::Population { n } => {
            let mut rep_means = Vec::with_capacity(m);
            for s in population_seeds(scenario.seed, m) {
                let mut sc = scenario.clone();
                sc.seed = s;
                let b = simulate_population(&sc, &[policy], n, opts)?;
                let steps = b.times.len() - 1;
                let mut total = vec![0.0; n];
                for k in 0..steps {
                    let z = b.states_at(k);
                    let u: Vec<f64> = b.controls.iter().map(|c| c[k]).collect();
                    for (t, c) in total.iter_mut().zip(scenario.cost.empirical(&z, &u)) {
                        *t += c * dt;
                    }
                }
                rep_means.push(stats::mean(&total));
            }
            Ok(CostEstimate::from_samples(&rep_means))
        }
    }
}

/// Cost of agent `i` in a population bundle: `Σ_k (1/N) Σ_j l2(z_i, u_i, z_j) dt`.
pub(crate) fn benes_population_costs(model: &BenesModel, b: &crate::dynamics::BenesBundle) -> Vec<f64> {
    let n = b.len();
    let steps = b.times.len() - 1;
    let mut total = vec![0.0; n];
    for k in 0..steps {
        let z2: Vec<f64> = b.x2.iter().map(|p| p[k]).collect();
        let mean = stats::mean(&z2);
        let var = z2.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        for (i, t) in total.iter_mut().enumerate() {
            *t += model.cost.eval([b.x1[i][k], b.x2[i][k]], b.controls[i][k], mean, var) * model.dt;
        }
    }
    total
}

/// Two-dimensional counterpart of [`evaluate_policy_cost`]; the mean field is
/// the law of `z₂`.
pub fn evaluate_benes_policy_cost(
    model: &BenesModel,
    policy: &dyn StatsPolicy,
    flow: Option<&MeasureFlow>,
    m: usize,
    which: CostMode,
    seed: u64,
    mode: BenesMode,
) -> Result<CostEstimate> {
    if m == 0 {
        return Err(Error::invalid("need at least one path or replication"));
    }
    match which {
        CostMode::Mv => {
            let flow = flow.ok_or_else(|| Error::invalid("MV cost evaluation needs a flow"))?;
            let field = FieldMoments::from_flow(flow, &model.times());
            let b = simulate_benes(model, &[policy], m, seed, mode)?;
            let steps = b.times.len() - 1;
            let per_path: Vec<f64> = (0..b.len())
                .map(|i| {
                    (0..steps)
                        .map(|k| {
                            model
                                .cost
                                .eval([b.x1[i][k], b.x2[i][k]], b.controls[i][k], field.mean[k], field.var[k])
                                * model.dt
                        })
                        .sum()
                })
                .collect();
            Ok(CostEstimate::from_samples(&per_path))
        }
        CostMode::Population { n } => {
            let mut rep_means = Vec::with_capacity(m);
            for s in population_seeds(seed, m) {
                let b = simulate_benes(model, &[policy], n, s, mode)?;
                rep_means.push(stats::mean(&benes_population_costs(model, &b)));
            }
            Ok(CostEstimate::from_samples(&rep_means))
        }
    }
}
