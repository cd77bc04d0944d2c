// Grid Zakai filter on a linear-Gaussian model, checked against the
// Kalman–Bucy filter run on the same observation record.
//
// ```bash
// cargo run --release --example zakai_filter
// ```

use pomfg::control::{CostForm, ZeroPolicy};
use pomfg::dynamics::{simulate_population, ControlSet, Drift, InitialLaw, Observation, Scenario, SimOptions};
use pomfg::filtering::{kalman_bucy_oracle, FilterMode, GridSpec, LinearModel};

pub fn run_example() -> pomfg::Result<()> {
    let scenario = Scenario {
        horizon: 1.0,
        dt: 1e-3,
        drift: Drift::Affine { a: -0.5, b: 0.0, c: 0.0 },
        sigma: 1.0,
        observation: Observation::linear(1.0),
        cost: CostForm::zero(),
        controls: ControlSet::new(-2.0, 2.0)?,
        init: InitialLaw::new(vec![1.0], 0.5)?,
        seed: 11,
    };
    let grid = GridSpec::new(-8.0, 8.0, 320);
    let opts = SimOptions::new(FilterMode::Grid(grid));
    let run = simulate_population(&scenario, &[&ZeroPolicy], 1, &opts)?;

    let dy: Vec<f64> = run.observations[0].windows(2).map(|w| w[1] - w[0]).collect();
    let kb = kalman_bucy_oracle(&LinearModel::new(-0.5, 1.0, 1.0, 1.0), &dy, scenario.dt, 1.0, 0.5)?;

    let est = &run.estimates[0];
    let (mut num, mut den) = (0.0, 0.0);
    for (m, k) in est.iter().zip(&kb.means) {
        num += (m - k) * (m - k);
        den += k * k;
    }
    println!("t      state     grid mean  kalman mean");
    for k in (0..run.times.len()).step_by(200) {
        println!("{:.2}  {:9.4}  {:9.4}  {:9.4}", run.times[k], run.states[0][k], est[k], kb.means[k]);
    }
    println!("relative RMS gap: {:.3e}", (num / den).sqrt());
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
