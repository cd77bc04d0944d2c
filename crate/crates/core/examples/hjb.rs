// Backward dynamic programming on the filter statistics for a frozen mean
// field, then a Monte Carlo check of the optimal value.
//
// ```bash
// cargo run --release --example hjb
// ```

use pomfg::cli::parse_config;
use pomfg::control::{evaluate_benes_policy_cost, solve_hjb_sufficient_stats, CostMode, HjbGrid, ZeroPolicy};
use pomfg::mfg::induced_flow_of_policy;

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config("", Some("benes-quadratic"), Some(8))?;
    let (model, mode) = (&cfg.benes, cfg.mode);
    let flow = induced_flow_of_policy(&ZeroPolicy, model, 500, cfg.seed, mode)?;
    let grid = HjbGrid::covering(model, mode, 9, 121, 21)?;
    let (value, policy) = solve_hjb_sufficient_stats(model, &flow, &grid, mode)?;

    let v0 = value.value(0, [model.xi[0], model.xi[1]]);
    let mc = evaluate_benes_policy_cost(model, &policy, Some(&flow), 2000, CostMode::Mv, 1, mode)?;
    println!("V(0, ξ) = {v0:.4}");
    println!("simulated cost = {:.4} ± {:.4}", mc.mean, mc.std_error);
    println!("policy Lipschitz bound {:.3}", policy.lipschitz());
    for r2 in [-1.0, 0.0, 1.0, 2.0] {
        println!("u(0, ({:.1}, {r2:4.1})) = {:+.4}", model.xi[0], policy.control_at(0.0, [model.xi[0], r2]));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
