// Girsanov-weighted particle filter with systematic resampling, compared
// with the Kalman–Bucy mean on a linear-Gaussian record.
//
// ```bash
// cargo run --release --example particle_filter
// ```

use pomfg::control::{CostForm, ZeroPolicy};
use pomfg::dynamics::{simulate_population, ControlSet, Drift, InitialLaw, Observation, Scenario, SimOptions};
use pomfg::filtering::{FilterMode, ParticleCloud};
use pomfg::rng::{stream, NoiseKind};

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
        seed: 3,
    };
    // The Kalman mode of the simulator gives the exact posterior mean.
    let run = simulate_population(&scenario, &[&ZeroPolicy], 1, &SimOptions::new(FilterMode::Kalman))?;
    let dy: Vec<f64> = run.observations[0].windows(2).map(|w| w[1] - w[0]).collect();

    let mut rng = stream(99, 0, NoiseKind::Filter);
    let mut cloud = ParticleCloud::gaussian(2000, 1.0, 0.5, &mut rng)?;
    for (k, d) in dy.iter().enumerate() {
        cloud.step(&mut rng, 0.0, *d, scenario.dt, 1.0, |x| -0.5 * x, |x| x)?;
        if (k + 1) % 250 == 0 {
            println!(
                "t={:.2}  particle mean {:8.4}  kalman mean {:8.4}",
                run.times[k + 1],
                cloud.mean(),
                run.estimates[0][k + 1]
            );
        }
    }
    println!("final error {:.4}", cloud.mean() - run.estimates[0][dy.len()]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
