use pomfg::control::{ConstantPolicy, CostForm, ZeroPolicy};
use pomfg::dynamics::{
    induced_flow, simulate_mckean_vlasov, simulate_population, ControlSet, Drift, InitialLaw, Observation, Scenario,
    SimOptions, TrajectoryBundle,
};
use pomfg::filtering::FilterMode;
use pomfg::measure_flow::{Measure, MeasureFlow};
use pomfg::stats;

fn scenario(drift: Drift, means: Vec<f64>, var: f64, seed: u64) -> Scenario {
    Scenario {
        horizon: 1.0,
        dt: 0.01,
        drift,
        sigma: 1.0,
        observation: Observation::linear(1.0),
        cost: CostForm::zero(),
        controls: ControlSet::new(-2.0, 2.0).unwrap(),
        init: InitialLaw::new(means, var).unwrap(),
        seed,
    }
}

fn driftless() -> Drift {
    Drift::Affine { a: 0.0, b: 0.0, c: 0.0 }
}

fn kalman() -> SimOptions {
    SimOptions::new(FilterMode::Kalman)
}

#[test]
fn brownian_population_has_the_right_mean_and_variance() {
    let m = 4000;
    let sc = scenario(driftless(), vec![0.3], 0.0, 1);
    let b = simulate_population(&sc, &[&ZeroPolicy], m, &kalman()).unwrap();
    let last = b.states_at(sc.steps());
    let band = 3.0 / (m as f64).sqrt();
    assert!((stats::mean(&last) - 0.3).abs() < band);
    assert!((stats::variance(&last) - 1.0).abs() < 5.0 * (2.0 / m as f64).sqrt());
}

#[test]
fn increments_are_gaussian_with_variance_sigma_squared_dt() {
    let sc = scenario(driftless(), vec![0.0], 0.0, 2);
    let b = simulate_population(&sc, &[&ZeroPolicy], 200, &kalman()).unwrap();
    let mut inc = Vec::new();
    for (path, noise) in b.states.iter().zip(&b.state_noise) {
        for (k, w) in path.windows(2).enumerate() {
            let d = w[1] - w[0];
            assert!((d - sc.dt.sqrt() * noise[k]).abs() < 1e-12);
            inc.push(d);
        }
    }
    let n = inc.len() as f64;
    assert!((stats::variance(&inc) / sc.dt - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
    assert!(stats::excess_kurtosis(&inc).abs() < 5.0 * (24.0 / n).sqrt());
}

fn cumulative_noise(b: &TrajectoryBundle, i: usize, dt: f64) -> f64 {
    b.state_noise[i].iter().map(|n| dt.sqrt() * n).sum()
}

#[test]
fn mean_reverting_pair_has_a_martingale_sum() {
    // With f(x, y) = y − x the interaction cancels in z₁ + z₂.
    let sc = scenario(Drift::Affine { a: -1.0, b: 1.0, c: 0.0 }, vec![-1.0, 2.0], 0.5, 3);
    let b = simulate_population(&sc, &[&ZeroPolicy], 2, &kalman()).unwrap();
    let k = sc.steps();
    let moved = b.states[0][k] + b.states[1][k] - b.states[0][0] - b.states[1][0];
    let noise = cumulative_noise(&b, 0, sc.dt) + cumulative_noise(&b, 1, sc.dt);
    assert!((moved - noise).abs() < 1e-10);
}

#[test]
fn controls_are_clipped_into_the_admissible_set() {
    let sc = scenario(driftless(), vec![0.0], 0.1, 4);
    let b = simulate_population(&sc, &[&ConstantPolicy(5.0)], 3, &kalman()).unwrap();
    assert!(b.controls.iter().flatten().all(|&u| u == sc.controls.max));
    let last = b.states_at(sc.steps());
    let first = b.states_at(0);
    for i in 0..3 {
        let drift = last[i] - first[i] - cumulative_noise(&b, i, sc.dt);
        assert!((drift - sc.controls.max * sc.horizon).abs() < 1e-9);
    }
}

#[test]
fn frozen_dirac_at_zero_reduces_to_brownian_motion() {
    let sc = scenario(Drift::Affine { a: 0.0, b: 1.0, c: 0.0 }, vec![0.5], 0.2, 5);
    let flow = MeasureFlow::constant(sc.times(), Measure::dirac(0.0)).unwrap();
    let b = simulate_mckean_vlasov(&sc, &ZeroPolicy, &flow, 10, &kalman()).unwrap();
    for i in 0..10 {
        let want = b.states[i][0] + cumulative_noise(&b, i, sc.dt);
        assert!((b.states[i][sc.steps()] - want).abs() < 1e-12);
    }
}

#[test]
fn flow_with_linear_mean_integrates_into_the_drift() {
    let m = 4000;
    let sc = scenario(Drift::Affine { a: 0.0, b: 1.0, c: 0.0 }, vec![0.0], 0.0, 6);
    let times = sc.times();
    let flow = MeasureFlow::new(times.clone(), times.iter().map(|&t| Measure::dirac(t)).collect()).unwrap();
    let b = simulate_mckean_vlasov(&sc, &ZeroPolicy, &flow, m, &kalman()).unwrap();
    let mean = stats::mean(&b.states_at(sc.steps()));
    // Left-point sum of t over the grid.
    let want: f64 = times[..sc.steps()].iter().map(|t| t * sc.dt).sum();
    assert!((want - (0.5 - 0.5 * sc.dt)).abs() < 1e-12);
    assert!((mean - want).abs() < 4.0 / (m as f64).sqrt());
}

#[test]
fn induced_flow_examples() {
    let sc = scenario(driftless(), vec![0.0], 0.0, 7);
    let b = simulate_population(&sc, &[&ZeroPolicy], 2000, &kalman()).unwrap();
    let flow = induced_flow(&b).unwrap();
    assert_eq!(flow.len(), sc.steps() + 1);
    assert_eq!(flow.measures()[0].variance(), 0.0);
    for k in [25, 50, 100] {
        let t = flow.times()[k];
        assert!((flow.measures()[k].variance() / t - 1.0).abs() < 0.15, "t = {t}");
    }

    let mut constant = b.clone();
    constant.states = vec![vec![1.5; sc.steps() + 1]; 3];
    let f = induced_flow(&constant).unwrap();
    assert!(f.measures().iter().all(|m| m.mean() == 1.5 && m.variance() == 0.0));

    let mut mirrored = b.clone();
    mirrored.states = vec![b.states[0].clone(), b.states[0].iter().map(|x| -x).collect()];
    let f = induced_flow(&mirrored).unwrap();
    assert!(f.means().iter().all(|m| m.abs() < 1e-12));
}

#[test]
fn simulations_are_deterministic_in_the_seed() {
    let sc = scenario(Drift::Affine { a: -0.5, b: 0.5, c: 0.0 }, vec![-1.0, 1.0], 0.25, 8);
    let a = simulate_population(&sc, &[&ZeroPolicy], 30, &kalman()).unwrap();
    let b = simulate_population(&sc, &[&ZeroPolicy], 30, &kalman()).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.observations, b.observations);
    let mut other = sc.clone();
    other.seed = 9;
    let c = simulate_population(&other, &[&ZeroPolicy], 30, &kalman()).unwrap();
    assert_ne!(a.states, c.states);
}

#[test]
fn standard_error_halves_with_four_times_the_paths() {
    let se = |m: usize| {
        let sc = scenario(driftless(), vec![0.0], 0.0, 10);
        let b = simulate_population(&sc, &[&ZeroPolicy], m, &kalman()).unwrap();
        stats::std_error(&b.states_at(sc.steps()))
    };
    let ratio = se(500) / se(2000);
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
}
