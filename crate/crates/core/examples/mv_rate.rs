// How fast the N-agent system approaches its McKean–Vlasov limit: average
// per-agent gap under common noise, and the fitted log-log slope.
//
// ```bash
// cargo run --release --example mv_rate
// ```

use pomfg::cli::parse_config;
use pomfg::control::MeanFeedback;
use pomfg::dynamics::{affine_feedback_mean_flow, SimOptions};
use pomfg::nash::mv_rate_study;

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config("[model]\ndt = 0.01\n", Some("mean-reversion-coupled"), Some(1))?;
    let policy = MeanFeedback { gain: 1.0, target: 0.0 };
    let flow = affine_feedback_mean_flow(&cfg.scenario, policy.gain, policy.target)?;
    let report = mv_rate_study(
        &cfg.scenario,
        &policy,
        &flow,
        &[8, 16, 32, 64, 128],
        8,
        cfg.seed,
        &SimOptions::new(cfg.filter.clone()),
    )?;
    for ((n, e), se) in report.n_values.iter().zip(&report.errors).zip(&report.std_errors) {
        println!("N={n:4}  error {e:.4} ± {se:.4}");
    }
    println!("slope {:.3} (Spearman {:.2})", report.slope, report.spearman);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
