// The finite-dimensional filter of the two-dimensional model: potential
// equation residual, Riccati covariance, posterior moments, and a check
// against a brute-force grid filter on the same observation path.
//
// ```bash
// cargo run --release --example benes_filter
// ```

use pomfg::cli::parse_config;
use pomfg::filtering::{benes_grid_comparison, benes_moments, phi_residual_check, BenesGrid};

pub fn run_example() -> pomfg::Result<()> {
    let cfg = parse_config("seed = 5\n", Some("benes-quadratic"), None)?;
    let (model, mode) = (&cfg.benes, cfg.mode);

    let xs: Vec<f64> = (0..=40).map(|i| -4.0 + 0.2 * i as f64).collect();
    let phi = phi_residual_check(model, &xs, &model.times(), 1e-6);
    println!("potential equation residual {:.2e} (pass: {})", phi.max_residual, phi.pass);

    let p = model.covariance_path(mode)?;
    let last = p.last().expect("nonempty path");
    println!("P(T) = [[{:.4}, {:.4}], [{:.4}, {:.4}]]", last[(0, 0)], last[(0, 1)], last[(1, 0)], last[(1, 1)]);

    // A coarse grid keeps the example quick; refine to tighten the distance.
    let (a, b) = BenesGrid::covering(model, 5.0, 61);
    let cmp = benes_grid_comparison(model, a, b, 0.5, cfg.seed, mode)?;
    for k in (0..cmp.times.len()).step_by(25) {
        let m = benes_moments(&cmp.stats[k], model)?;
        println!(
            "t={:.2}  filter mean ({:.3}, {:.3})  grid mean ({:.3}, {:.3})  L1 {:.4}",
            cmp.times[k], m.mean[0], m.mean[1], cmp.grid_mean[k][0], cmp.grid_mean[k][1], cmp.l1[k]
        );
    }
    println!("L1 at the horizon: {:.4}", cmp.l1_at_horizon());
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
