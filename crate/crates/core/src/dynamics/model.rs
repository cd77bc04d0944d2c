use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::CostForm;
use crate::error::{Error, Result};
use crate::measure_flow::Measure;

type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coupling drift `f†(t, x, y)`; the agent's drift is `∫ f†(t, x, y) μ(dy) + u`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Drift {
    /// `a x + b y + c`.
    Affine { a: f64, b: f64, c: f64 },
    #[serde(skip)]
    Custom(Fn3),
}

impl std::fmt::Debug for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Drift::Affine { a, b, c } => write!(f, "Affine({a} x + {b} y + {c})"),
            Drift::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Drift {
    pub fn zero() -> Self {
        Drift::Affine { a: 0.0, b: 0.0, c: 0.0 }
    }

    /// `γ (y − x)`: attraction towards the population.
    pub fn mean_reversion(gamma: f64) -> Self {
        Drift::Affine {
            a: -gamma,
            b: gamma,
            c: 0.0,
        }
    }

    pub fn custom(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Drift::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            Drift::Affine { a, b, c } => a * x + b * y + c,
            Drift::Custom(f) => f(t, x, y),
        }
    }

    /// Whether the drift depends on the mean field at all.
    pub fn is_coupled(&self) -> bool {
        match self {
            Drift::Affine { b, .. } => *b != 0.0,
            Drift::Custom(_) => true,
        }
    }

    /// Freeze the mean-field argument at `μ`.
    pub fn frozen<'a>(&'a self, t: f64, mu: &'a Measure) -> FrozenDrift<'a> {
        let offset = match self {
            Drift::Affine { b, c, .. } => {
                if *b == 0.0 {
                    *c
                } else {
                    b * mu.mean() + c
                }
            }
            Drift::Custom(_) => 0.0,
        };
        FrozenDrift {
            drift: self,
            t,
            mu,
            offset,
        }
    }

    /// Empirical coupling `(1/N) Σ_j f†(t, x_i, x_j)` for every agent.
    pub fn empirical(&self, t: f64, states: &[f64]) -> Vec<f64> {
        let n = states.len() as f64;
        match self {
            Drift::Affine { a, b, c } => {
                let mean = states.iter().sum::<f64>() / n;
                states.iter().map(|x| a * x + b * mean + c).collect()
            }
            Drift::Custom(f) => states
                .iter()
                .map(|x| states.iter().map(|y| f(t, *x, *y)).sum::<f64>() / n)
                .collect(),
        }
    }
}

/// The coupling drift with its measure argument fixed: `x ↦ ∫ f†(t, x, y) μ(dy)`.
#[derive(Clone, Copy)]
pub struct FrozenDrift<'a> {
    drift: &'a Drift,
    pub t: f64,
    mu: &'a Measure,
    offset: f64,
}

impl FrozenDrift<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self.drift {
            Drift::Affine { a, .. } => a * x + self.offset,
            Drift::Custom(f) => self.mu.integrate(|y| f(self.t, x, y)),
        }
    }

    /// `(slope, offset)` when the frozen drift is affine in `x`.
    pub fn affine(&self) -> Option<(f64, f64)> {
        match self.drift {
            Drift::Affine { a, .. } => Some((*a, self.offset)),
            Drift::Custom(_) => None,
        }
    }
}

/// Mean-field drift `∫ f†(t, x, y) μ(dy)` by the measure's own quadrature.
pub fn mean_field_drift(drift: &Drift, t: f64, x: f64, mu: &Measure) -> Result<f64> {
    if !mu.is_normalized() {
        return Err(Error::invalid("mean_field_drift needs a normalised measure"));
    }
    Ok(drift.frozen(t, mu).eval(x))
}

/// Observation function `h(x)`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observation {
    /// `c x + d`.
    Linear { c: f64, d: f64 },
    #[serde(skip)]
    Custom(Fn1),
}

impl std::fmt::Debug for Observation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Observation::Linear { c, d } => write!(f, "Linear({c} x + {d})"),
            Observation::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Observation {
    pub fn zero() -> Self {
        Observation::Linear { c: 0.0, d: 0.0 }
    }

    pub fn linear(c: f64) -> Self {
        Observation::Linear { c, d: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observation::Linear { c, d } => c * x + d,
            Observation::Custom(h) => h(x),
        }
    }

    pub fn linear_parts(&self) -> Option<(f64, f64)> {
        match self {
            Observation::Linear { c, d } => Some((*c, *d)),
            Observation::Custom(_) => None,
        }
    }
}

/// Compact control interval `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub min: f64,
    pub max: f64,
}

impl ControlSet {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min < max) {
            return Err(Error::config("control interval needs u_min < u_max"));
        }
        Ok(ControlSet { min, max })
    }

    pub fn clip(&self, u: f64) -> f64 {
        u.clamp(self.min, self.max)
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.min && u <= self.max
    }

    /// `n` equally spaced points including both ends.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Per-agent Gaussian initial laws `N(means[i mod len], variance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub means: Vec<f64>,
    pub variance: f64,
}

impl InitialLaw {
    pub fn new(means: Vec<f64>, variance: f64) -> Result<Self> {
        if means.is_empty() || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::config("initial means must be nonempty and finite"));
        }
        if !(variance >= 0.0) {
            return Err(Error::config("initial variance must be nonnegative"));
        }
        Ok(InitialLaw { means, variance })
    }

    pub fn mean_of(&self, agent: usize) -> f64 {
        self.means[agent % self.means.len()]
    }
}

/// A scalar partially observed mean field model on a fixed time grid.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub horizon: f64,
    pub dt: f64,
    pub drift: Drift,
    pub sigma: f64,
    pub observation: Observation,
    pub cost: CostForm,
    pub controls: ControlSet,
    pub init: InitialLaw,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config("sigma must be positive"));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::config("dt and horizon must be positive"));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config(format!(
                "horizon / dt = {steps} is not an integer"
            )));
        }
        ControlSet::new(self.controls.min, self.controls.max)?;
        InitialLaw::new(self.init.means.clone(), self.init.variance)?;
        self.cost.validate()?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn mean_field_drift_examples() {
        let ident = Drift::Affine { a: 0.0, b: 1.0, c: 0.0 };
        assert_eq!(mean_field_drift(&ident, 0.0, 3.0, &Measure::dirac(0.7)).unwrap(), 0.7);
        assert_eq!(mean_field_drift(&Drift::zero(), 0.0, 3.0, &Measure::dirac(0.7)).unwrap(), 0.0);
        let sine = Drift::custom(|_, _, y: f64| y.sin());
        let mu = crate::measure_flow::empirical_measure(&[0.0, FRAC_PI_2]).unwrap();
        assert!((mean_field_drift(&sine, 0.0, 1.0, &mu).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_coupling_matches_pairwise_sum() {
        let d = Drift::mean_reversion(0.5);
        let xs = [0.0, 1.0, 3.0];
        let fast = d.empirical(0.0, &xs);
        let slow = Drift::custom(|_, x, y| 0.5 * (y - x)).empirical(0.0, &xs);
        for (a, b) in fast.iter().zip(slow) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(fast.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn control_set_rules() {
        assert!(ControlSet::new(1.0, 1.0).is_err());
        let u = ControlSet::new(-1.0, 2.0).unwrap();
        assert_eq!(u.clip(5.0), 2.0);
        assert_eq!(u.grid(4), vec![-1.0, 0.0, 1.0, 2.0]);
    }
}
