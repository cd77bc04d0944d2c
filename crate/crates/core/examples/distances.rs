// Truncated Wasserstein distances between empirical measures, flows and
// path ensembles.
//
// ```bash
// cargo run --example distances
// ```

use pomfg::measure_flow::{
    empirical_measure, marginal_distance, path_distance_dt, solve_assignment, sup_marginal_distance, MeasureFlow,
    PathEnsemble,
};
use pomfg::rng::{normals, NoiseKind};

pub fn run_example() -> pomfg::Result<()> {
    let a = empirical_measure(&normals(7, 0, NoiseKind::State, 400))?;
    let b = empirical_measure(&normals(7, 1, NoiseKind::State, 400))?;
    let shifted = a.shifted(0.3);
    println!("W(a, b)       = {:.4}", marginal_distance(&a, &b)?);
    println!("W(a, a + 0.3) = {:.4}", marginal_distance(&a, &shifted)?);
    // Shifts beyond 1 saturate.
    println!("W(a, a + 5)   = {:.4}", marginal_distance(&a, &a.shifted(5.0))?);

    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let (perm, total) = solve_assignment(&cost);
    println!("assignment {perm:?} with cost {total}");

    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let walk = |seed: u64, drift: f64| -> Vec<Vec<f64>> {
        (0..16)
            .map(|i| {
                let z = normals(seed, i, NoiseKind::State, times.len() - 1);
                let mut x = vec![0.0];
                for (k, n) in z.iter().enumerate() {
                    x.push(x[k] + drift * 0.05 + 0.05f64.sqrt() * n);
                }
                x
            })
            .collect()
    };
    let p = PathEnsemble::new(times.clone(), walk(1, 0.0), 1)?;
    let q = PathEnsemble::new(times.clone(), walk(2, 0.5), 2)?;
    let (fp, fq): (MeasureFlow, MeasureFlow) = (p.to_flow(), q.to_flow());
    println!("sup_t W(p_t, q_t) = {:.4}", sup_marginal_distance(&fp, &fq)?);
    println!("D_T(p, q)         = {:.4}", path_distance_dt(&p, &q)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pomfg::Result<()> {
    run_example()
}
