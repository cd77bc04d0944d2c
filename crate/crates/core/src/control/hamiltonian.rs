use crate::dynamics::ControlSet;
use crate::filtering::InformationState;
use crate::measure_flow::Measure;

use super::cost::CostForm;

/// `a ⟨∂_x V_p, p⟩ + ⟨L(·, a, μ), p⟩`, both pairings by the state's own
/// quadrature.
pub fn hamiltonian(
    p: &dyn InformationState,
    a: f64,
    grad_v: &dyn Fn(f64) -> f64,
    mu: &Measure,
    cost: &CostForm,
) -> f64 {
    a * p.pair(grad_v) + p.pair(&|x| cost.l0.against(x, mu)) + cost.control_cost(a) * p.mass()
}

/// Number of points in the grid search used when `λ_u = 0`.
pub const GRID_SEARCH_POINTS: usize = 1001;

/// Pick the best of `(a, value)` candidates: lowest value, ties (within a
/// relative `1e-12`) broken by smallest `|a|`, then smallest `a`.
pub fn argmin_tie_break(cands: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    let mut best: Option<(f64, f64)> = None;
    for (a, v) in cands {
        best = Some(match best {
            None => (a, v),
            Some((ba, bv)) => {
                let tol = 1e-12 * (1.0 + bv.abs().max(v.abs()));
                if v < bv - tol || (v <= bv + tol && (a.abs(), a) < (ba.abs(), ba)) {
                    (a, v)
                } else {
                    (ba, bv)
                }
            }
        });
    }
    best.expect("argmin over an empty candidate set")
}

/// Minimiser of the Hamiltonian over `U`: the projected closed form when
/// `λ_u > 0`, a grid search otherwise.
pub fn minimize_hamiltonian(
    p: &dyn InformationState,
    grad_v: &dyn Fn(f64) -> f64,
    _mu: &Measure,
    cost: &CostForm,
    controls: &ControlSet,
) -> f64 {
    let g = p.pair(grad_v);
    let mass = p.mass();
    if cost.lam > 0.0 {
        return controls.clip(-g / (cost.lam * mass));
    }
    // l0 does not depend on a, so only the a-dependent part is compared.
    let mut grid = controls.grid(GRID_SEARCH_POINTS);
    if controls.contains(0.0) {
        grid.push(0.0);
    }
    argmin_tie_break(grid.into_iter().map(|a| (a, a * g + cost.control_cost(a) * mass))).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::StateCost;
    use crate::filtering::{DensityGrid, GridSpec};

    fn density(scale: f64) -> DensityGrid {
        let spec = GridSpec::new(-6.0, 6.0, 241);
        let g = DensityGrid::gaussian(spec, 0.4, 0.8).unwrap();
        DensityGrid::new(spec, g.values().iter().map(|v| v * scale).collect(), 0.0).unwrap()
    }

    #[test]
    fn pure_control_penalty() {
        let p = density(1.0);
        let c = CostForm::control_only(1.0);
        let h = hamiltonian(&p, 0.7, &|_| 0.0, &Measure::dirac(0.0), &c);
        assert!((h - 0.245).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_is_quadratic_in_a() {
        let p = density(1.0);
        let mu = Measure::dirac(0.3);
        let c = CostForm::new(
            StateCost::Quadratic {
                weight: 1.0,
                target: 0.0,
                gamma: 0.5,
            },
            0.6,
        )
        .unwrap();
        let gv = |x: f64| x.sin();
        let pair_g: f64 = p.pair(|x| gv(x));
        let pair_l: f64 = p.pair(|x| c.l0.eval(x, 0.3));
        for a in [-1.3, -0.2, 0.0, 0.9, 2.2] {
            let expect = a * pair_g + pair_l + 0.3 * a * a * p.mass();
            assert!((hamiltonian(&p, a, &gv, &mu, &c) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn minimiser_examples() {
        let u = ControlSet::new(-1.0, 1.0).unwrap();
        let p = density(1.0);
        let mu = Measure::dirac(0.0);
        let c = CostForm::control_only(1.0);
        assert_eq!(minimize_hamiltonian(&p, &|_| 0.0, &mu, &c, &u), 0.0);
        assert_eq!(minimize_hamiltonian(&p, &|_| 2.0, &mu, &c, &u), -1.0);
        let bang = minimize_hamiltonian(&p, &|_| 1.0, &mu, &CostForm::zero(), &u);
        assert_eq!(bang, -1.0);
        let flat = minimize_hamiltonian(&p, &|_| 0.0, &mu, &CostForm::zero(), &u);
        assert_eq!(flat, 0.0);
    }

    #[test]
    fn minimiser_ignores_density_scale() {
        let u = ControlSet::new(-2.0, 2.0).unwrap();
        let mu = Measure::dirac(0.0);
        let gv = |x: f64| 0.8 * x + 0.1;
        for c in [CostForm::control_only(1.5), CostForm::zero()] {
            let base = minimize_hamiltonian(&density(1.0), &gv, &mu, &c, &u);
            for s in [0.1, 10.0] {
                assert!((minimize_hamiltonian(&density(s), &gv, &mu, &c, &u) - base).abs() < 1e-9);
            }
        }
    }
}
