// Unilateral deviation audit: one agent tries affine perturbations of the
// mean field policy and a best response to the realised population, and
// the profitable gap is tracked across N.
//
// ```bash
// cargo run --release --example nash_audit
// ```

use pomfg::cli::parse_config;
use pomfg::control::{HjbGrid, ZeroPolicy};
use pomfg::mfg::{induced_flow_of_policy, nce_iterate, NceOptions};
use pomfg::nash::{nash_rate_study, DeviationBudget};

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config("", Some("benes-quadratic"), Some(6))?;
    let (model, mode) = (&cfg.benes, cfg.mode);
    let grid = HjbGrid::covering(model, mode, 7, 41, 15)?;
    let opts = NceOptions {
        tol: 1e-3,
        max_iter: 5,
        paths: 300,
        seed: cfg.seed,
        theta: 1.0,
        mode,
        dt_paths: 20,
    };
    let start = induced_flow_of_policy(&ZeroPolicy, model, opts.paths, cfg.seed, mode)?;
    let nce = nce_iterate(&start, model, &grid, &opts)?;

    let budget = DeviationBudget {
        alphas: vec![0.5, 1.5],
        betas: vec![-0.2, 0.2],
        best_response: true,
        replications: 4,
    };
    let report = nash_rate_study(model, &grid, &nce.policy, nce.final_flow(), &[8, 32], &budget, 9, mode)?;
    for r in &report.reports {
        println!(
            "N={:3}  baseline {:.4}  best deviation {} at {:.4}  gap {:+.2e} ± {:.1e}",
            r.n, r.baseline_cost, r.best_deviation, r.best_deviation_cost, r.gap, r.gap_se
        );
    }
    println!("{}", report.message);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
