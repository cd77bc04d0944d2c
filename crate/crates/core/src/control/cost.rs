use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_flow::Measure;

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// State part `l0(x, y)` of the running cost.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateCost {
    Zero,
    Constant { value: f64 },
    /// `weight (x − target)² + gamma (x − y)²`.
    Quadratic { weight: f64, target: f64, gamma: f64 },
    #[serde(skip)]
    Custom(Fn2),
}

impl std::fmt::Debug for StateCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateCost::Zero => write!(f, "Zero"),
            StateCost::Constant { value } => write!(f, "Constant({value})"),
            StateCost::Quadratic {
                weight,
                target,
                gamma,
            } => write!(f, "Quadratic({weight} (x - {target})^2 + {gamma} (x - y)^2)"),
            StateCost::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl StateCost {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        StateCost::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            StateCost::Zero => 0.0,
            StateCost::Constant { value } => *value,
            StateCost::Quadratic {
                weight,
                target,
                gamma,
            } => weight * (x - target).powi(2) + gamma * (x - y).powi(2),
            StateCost::Custom(f) => f(x, y),
        }
    }

    /// `∫ l0(x, y) μ(dy)`.
    pub fn against(&self, x: f64, mu: &Measure) -> f64 {
        match self {
            StateCost::Zero => 0.0,
            StateCost::Constant { value } => *value,
            StateCost::Quadratic {
                weight,
                target,
                gamma,
            } => {
                let mut v = weight * (x - target).powi(2);
                if *gamma != 0.0 {
                    let m = mu.mean();
                    v += gamma * ((x - m).powi(2) + mu.variance());
                }
                v
            }
            StateCost::Custom(f) => mu.integrate(|y| f(x, y)),
        }
    }

    pub fn is_coupled(&self) -> bool {
        match self {
            StateCost::Quadratic { gamma, .. } => *gamma != 0.0,
            StateCost::Custom(_) => true,
            _ => false,
        }
    }
}

/// Running cost `L(x, u, y) = l0(x, y) + ½ λ_u u²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostForm {
    pub l0: StateCost,
    pub lam: f64,
}

impl CostForm {
    pub fn new(l0: StateCost, lam: f64) -> Result<Self> {
        let c = CostForm { l0, lam };
        c.validate()?;
        Ok(c)
    }

    pub fn zero() -> Self {
        CostForm {
            l0: StateCost::Zero,
            lam: 0.0,
        }
    }

    pub fn control_only(lam: f64) -> Self {
        CostForm {
            l0: StateCost::Zero,
            lam,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lam >= 0.0) || !self.lam.is_finite() {
            return Err(Error::config("control weight lam must be nonnegative"));
        }
        Ok(())
    }

    pub fn control_cost(&self, u: f64) -> f64 {
        0.5 * self.lam * u * u
    }

    /// `∫ L(x, u, y) μ(dy)`.
    pub fn running(&self, x: f64, u: f64, mu: &Measure) -> f64 {
        self.l0.against(x, mu) + self.control_cost(u)
    }

    /// Empirical coupling `(1/N) Σ_j L(x_i, u_i, x_j)` for every agent.
    pub fn empirical(&self, states: &[f64], controls: &[f64]) -> Vec<f64> {
        let n = states.len() as f64;
        let l0: Vec<f64> = match &self.l0 {
            StateCost::Quadratic {
                weight,
                target,
                gamma,
            } => {
                let m = states.iter().sum::<f64>() / n;
                let s2 = states.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n;
                states
                    .iter()
                    .map(|x| weight * (x - target).powi(2) + gamma * ((x - m).powi(2) + s2))
                    .collect()
            }
            other => states
                .iter()
                .map(|x| states.iter().map(|y| other.eval(*x, *y)).sum::<f64>() / n)
                .collect(),
        };
        l0.iter()
            .zip(controls)
            .map(|(l, u)| l + self.control_cost(*u))
            .collect()
    }
}
