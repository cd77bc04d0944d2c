// Nash certainty equivalence iteration: best response to a flow, then the
// flow induced by that response, until the flow stops moving.
//
// ```bash
// cargo run --release --example mfg_fixed_point
// ```

use pomfg::cli::parse_config;
use pomfg::control::{HjbGrid, ZeroPolicy};
use pomfg::mfg::{
    estimate_gain_constants, induced_flow_of_policy, nce_iterate, probe_states, shifted_flows, NceOptions,
};

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config("", Some("benes-quadratic"), Some(4))?;
    let (model, mode) = (&cfg.benes, cfg.mode);
    let grid = HjbGrid::covering(model, mode, 9, 61, 21)?;
    let opts = NceOptions {
        tol: 1e-3,
        max_iter: 8,
        paths: 400,
        seed: cfg.seed,
        theta: 1.0,
        mode,
        dt_paths: 50,
    };
    let start = induced_flow_of_policy(&ZeroPolicy, model, opts.paths, cfg.seed, mode)?;
    let report = nce_iterate(&start, model, &grid, &opts)?;
    for (i, d) in report.distances.iter().enumerate() {
        println!("iteration {}: sup_t W = {d:.2e}", i + 1);
    }
    println!("converged: {}  monotone: {}", report.converged, report.monotone());

    let probes = probe_states(model, &report.policy, 16, 20, 2, mode)?;
    let shifted = shifted_flows(report.final_flow(), &[0.25, -0.25]);
    let gain = estimate_gain_constants(model, &grid, report.final_flow(), &shifted, &probes, opts.paths, 3, mode)?;
    println!("c1 ≈ {:.3}, c2 ≈ {:.3}, product {:.3}", gain.c1, gain.c2, gain.product);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
