// An N-agent population and its McKean–Vlasov limit driven by common random
// numbers, with the empirical flow and the distance between them.
//
// ```bash
// cargo run --release --example population
// ```

use pomfg::control::{CostForm, MeanFeedback};
use pomfg::dynamics::{
    affine_feedback_mean_flow, induced_flow, simulate_mckean_vlasov, simulate_population, ControlSet, Drift,
    InitialLaw, Observation, Scenario, SimOptions,
};
use pomfg::filtering::FilterMode;
use pomfg::measure_flow::sup_marginal_distance;

pub fn run_example() -> pomfg::Result<()> {
    let scenario = Scenario {
        horizon: 1.0,
        dt: 0.005,
        // Agents are pulled towards the population mean.
        drift: Drift::Affine { a: -0.5, b: 0.5, c: 0.0 },
        sigma: 1.0,
        observation: Observation::linear(1.0),
        cost: CostForm::zero(),
        controls: ControlSet::new(-2.0, 2.0)?,
        init: InitialLaw::new(vec![-1.0, 1.0], 0.25)?,
        seed: 21,
    };
    let policy = MeanFeedback { gain: 1.0, target: 0.0 };
    let limit = affine_feedback_mean_flow(&scenario, policy.gain, policy.target)?;
    let opts = SimOptions::new(FilterMode::Kalman).without_noise();

    for n in [10, 40, 160] {
        let pop = simulate_population(&scenario, &[&policy], n, &opts)?;
        let mv = simulate_mckean_vlasov(&scenario, &policy, &limit, n, &opts.clone().with_filter_flow(limit.clone()))?;
        let gap = (0..n)
            .map(|i| (pop.states[i].last().unwrap() - mv.states[i].last().unwrap()).abs())
            .sum::<f64>()
            / n as f64;
        let flow = induced_flow(&pop)?;
        println!(
            "N={n:4}  mean |z_i - z̄_i| at T = {gap:.4}  sup_t W(empirical, MV) = {:.4}",
            sup_marginal_distance(&flow, &induced_flow(&mv)?)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
