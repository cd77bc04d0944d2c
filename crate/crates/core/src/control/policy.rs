use std::io::Read;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::filtering::{InformationState, SufficientStats};

/// Separated feedback law: the control depends on the observations only
/// through the agent's information state. Callers clip the output into `U`.
pub trait Policy: Send + Sync {
    fn control(&self, t: f64, state: &dyn InformationState) -> f64;

    fn describe(&self) -> String {
        "policy".into()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn control(&self, _: f64, _: &dyn InformationState) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        "zero".into()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn control(&self, _: f64, _: &dyn InformationState) -> f64 {
        self.0
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// `u = −gain (E_p[x] − target)`.
#[derive(Clone, Copy, Debug)]
pub struct MeanFeedback {
    pub gain: f64,
    pub target: f64,
}

impl Policy for MeanFeedback {
    fn control(&self, _: f64, state: &dyn InformationState) -> f64 {
        -self.gain * (state.mean() - self.target)
    }

    fn describe(&self) -> String {
        format!("mean-feedback(gain={}, target={})", self.gain, self.target)
    }
}

/// `u = α u°(t, p) + β`, a deviation built on a base law.
#[derive(Clone)]
pub struct AffineDeviation {
    pub base: Arc<dyn Policy>,
    pub alpha: f64,
    pub beta: f64,
}

impl Policy for AffineDeviation {
    fn control(&self, t: f64, state: &dyn InformationState) -> f64 {
        self.alpha * self.base.control(t, state) + self.beta
    }

    fn describe(&self) -> String {
        format!("{}*({})+{}", self.alpha, self.base.describe(), self.beta)
    }
}

/// Separated control from a supplied gradient kernel `x ↦ ∂_x V_p(x)`:
/// `u = −⟨∂_x V_p, p⟩ / (λ_u ⟨1, p⟩)`. The kernel is piecewise linear
/// between its nodes and constant beyond them.
#[derive(Clone, Debug)]
pub struct SeparatedPolicy {
    xs: Vec<f64>,
    grad: Vec<f64>,
    pub lam: f64,
}

impl SeparatedPolicy {
    pub fn new(xs: Vec<f64>, grad: Vec<f64>, lam: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != grad.len() {
            return Err(Error::invalid("gradient kernel needs matching nonempty columns"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("gradient kernel nodes must increase"));
        }
        if !(lam > 0.0) {
            return Err(Error::config("separated policy needs lam > 0"));
        }
        Ok(SeparatedPolicy { xs, grad, lam })
    }

    /// Read an `x,gradV` CSV.
    pub fn read_csv<R: Read>(r: R, lam: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "gradV" {
            return Err(Error::invalid("gradient kernel CSV needs header x,gradV"));
        }
        let (mut xs, mut gs) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
            };
            xs.push(parse(&rec[0])?);
            gs.push(parse(&rec[1])?);
        }
        Self::new(xs, gs, lam)
    }

    pub fn kernel(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.grad[0];
        }
        if x >= self.xs[n - 1] {
            return self.grad[n - 1];
        }
        let j = self.xs.partition_point(|v| *v <= x) - 1;
        let w = (x - self.xs[j]) / (self.xs[j + 1] - self.xs[j]);
        (1.0 - w) * self.grad[j] + w * self.grad[j + 1]
    }
}

impl Policy for SeparatedPolicy {
    fn control(&self, _: f64, state: &dyn InformationState) -> f64 {
        -state.pair(&|x| self.kernel(x)) / (self.lam * state.mass())
    }

    fn describe(&self) -> String {
        format!("separated({} kernel nodes)", self.xs.len())
    }
}

/// Feedback law on the finite-dimensional statistic `(r, P, λ)`.
pub trait StatsPolicy: Send + Sync {
    fn control(&self, t: f64, s: &SufficientStats) -> f64;

    fn describe(&self) -> String {
        "stats-policy".into()
    }
}

impl StatsPolicy for ZeroPolicy {
    fn control(&self, _: f64, _: &SufficientStats) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        "zero".into()
    }
}

impl StatsPolicy for ConstantPolicy {
    fn control(&self, _: f64, _: &SufficientStats) -> f64 {
        self.0
    }

    fn describe(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// `u = α u°(t, s) + β` on the statistic.
#[derive(Clone)]
pub struct StatsDeviation {
    pub base: Arc<dyn StatsPolicy>,
    pub alpha: f64,
    pub beta: f64,
}

impl StatsPolicy for StatsDeviation {
    fn control(&self, t: f64, s: &SufficientStats) -> f64 {
        self.alpha * self.base.control(t, s) + self.beta
    }

    fn describe(&self) -> String {
        format!("{}*u0+{}", self.alpha, self.beta)
    }
}
