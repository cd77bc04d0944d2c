use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FrozenDrift, Scenario};
use crate::error::{Error, Result};

use super::grid::{DensityGrid, GridSpec, ZakaiSolver};
use super::kalman::LinearModel;
use super::particle::ParticleCloud;

/// Anything a separated policy can read: an (unnormalised) law of the agent's
/// state.
pub trait InformationState {
    /// Unnormalised pairing `⟨f, p⟩`.
    fn pair(&self, f: &dyn Fn(f64) -> f64) -> f64;

    /// `⟨1, p⟩`.
    fn mass(&self) -> f64;

    fn mean(&self) -> f64 {
        self.pair(&|x| x) / self.mass()
    }

    fn variance(&self) -> f64 {
        let m = self.mean();
        self.pair(&|x| (x - m) * (x - m)) / self.mass()
    }
}

impl InformationState for DensityGrid {
    fn pair(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        DensityGrid::pair(self, f)
    }

    fn mass(&self) -> f64 {
        DensityGrid::mass(self)
    }
}

impl InformationState for ParticleCloud {
    fn pair(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        self.expect(f)
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn mean(&self) -> f64 {
        ParticleCloud::mean(self)
    }
}

/// Gaussian conditional law, the information state of linear models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub var: f64,
}

impl InformationState for GaussianBelief {
    fn pair(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = gauss_hermite();
        let sd = self.var.max(0.0).sqrt();
        nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * f(self.mean + sd * x))
            .sum()
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn variance(&self) -> f64 {
        self.var
    }
}

const HERMITE_POINTS: usize = 32;

/// Nodes and weights of the 32-point Gauss–Hermite rule for the standard
/// normal law (Golub–Welsch).
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = HERMITE_POINTS;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jac[(k - 1, k)] = b;
            jac[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        (
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1 / total).collect(),
        )
    })
}

/// Which filter an agent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterMode {
    Grid(GridSpec),
    Particle { n: usize },
    /// Exact for affine drift and linear observation.
    Kalman,
}

/// A running filter for one agent.
#[derive(Clone, Debug)]
pub enum AgentFilter {
    Grid {
        solver: Arc<ZakaiSolver>,
        density: DensityGrid,
    },
    Particle {
        cloud: ParticleCloud,
        rng: ChaCha8Rng,
    },
    Kalman {
        belief: GaussianBelief,
    },
}

impl AgentFilter {
    pub fn state(&self) -> &dyn InformationState {
        match self {
            AgentFilter::Grid { density, .. } => density,
            AgentFilter::Particle { cloud, .. } => cloud,
            AgentFilter::Kalman { belief } => belief,
        }
    }

    /// Advance over `[t, t + dt]`. `grid_drift` holds the frozen mean-field
    /// drift at the solver interfaces (shared by all grid filters at `t`).
    pub fn step(
        &mut self,
        scenario: &Scenario,
        field: &FrozenDrift<'_>,
        grid_drift: Option<&[f64]>,
        u: f64,
        dy: f64,
    ) -> Result<()> {
        let dt = scenario.dt;
        match self {
            AgentFilter::Grid { solver, density } => {
                let drift = grid_drift
                    .ok_or_else(|| Error::invalid("grid filter stepped without interface drift"))?;
                *density = solver.kushner_step(density, drift, u, dy)?;
            }
            AgentFilter::Particle { cloud, rng } => {
                cloud.step(
                    rng,
                    u,
                    dy,
                    dt,
                    scenario.sigma,
                    |x| field.eval(x),
                    |x| scenario.observation.eval(x),
                )?;
            }
            AgentFilter::Kalman { belief } => {
                let (a, offset) = field
                    .affine()
                    .ok_or_else(|| Error::config("Kalman filter needs an affine drift"))?;
                let (c, d) = scenario
                    .observation
                    .linear_parts()
                    .ok_or_else(|| Error::config("Kalman filter needs a linear observation"))?;
                let model = LinearModel {
                    a,
                    b: offset,
                    c,
                    sigma: scenario.sigma,
                    r: 1.0,
                };
                belief.mean = model.mean_step(belief.mean, belief.var, u, dy - d * dt, dt);
                belief.var = model.variance_step(belief.var, dt);
                if !(belief.mean.is_finite() && belief.var.is_finite()) {
                    return Err(Error::blowup(field.t + dt, "Kalman moments diverged"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let g = GaussianBelief { mean: 1.0, var: 4.0 };
        assert!((g.pair(&|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((g.pair(&|x| x) - 1.0).abs() < 1e-12);
        assert!((g.pair(&|x| (x - 1.0).powi(2)) - 4.0).abs() < 1e-10);
        assert!((g.pair(&|x| (x - 1.0).powi(4)) - 48.0).abs() < 1e-8);
    }

    #[test]
    fn filter_mode_parses_from_toml() {
        let m: FilterMode = toml::from_str("kind = \"particle\"\nn = 100").unwrap();
        assert_eq!(m, FilterMode::Particle { n: 100 });
        let g: FilterMode =
            toml::from_str("kind = \"grid\"\nx_lo = -5.0\nx_hi = 5.0\nnodes = 101").unwrap();
        assert_eq!(g, FilterMode::Grid(GridSpec::new(-5.0, 5.0, 101)));
    }
}
