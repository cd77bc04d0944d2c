use rand::Rng;

use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::measure_flow::Measure;
use crate::rng::normal;

/// Weighted particle approximation of the conditional law. Log-weights carry
/// the Girsanov factor `Σ (h(x) dy − ½ h(x)² dt)` since the last resampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    pub positions: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub ess: f64,
    pub t: f64,
}

impl ParticleCloud {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("particle cloud needs finite positions"));
        }
        let n = positions.len();
        Ok(ParticleCloud {
            positions,
            log_weights: vec![0.0; n],
            ess: n as f64,
            t: 0.0,
        })
    }

    /// `n` draws from `N(mean, var)`.
    pub fn gaussian<R: Rng + ?Sized>(n: usize, mean: f64, var: f64, rng: &mut R) -> Result<Self> {
        let sd = var.max(0.0).sqrt();
        ParticleCloud::new((0..n).map(|_| mean + sd * normal(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Normalised weights.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weights()
            .iter()
            .zip(&self.positions)
            .map(|(w, x)| w * f(*x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn to_measure(&self) -> Result<Measure> {
        Measure::particles(self.positions.clone(), self.weights())
    }

    /// Propagate with drift `b(x) + u`, reweight with the observation
    /// increment (using pre-move positions, as the state simulation does), and
    /// resample systematically when the ESS drops below `n/2`.
    #[allow(clippy::too_many_arguments)]
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        u: f64,
        dy: f64,
        dt: f64,
        sigma: f64,
        drift: impl Fn(f64) -> f64,
        h: impl Fn(f64) -> f64,
    ) -> Result<()> {
        let sq = sigma * dt.sqrt();
        for (x, lw) in self.positions.iter_mut().zip(self.log_weights.iter_mut()) {
            let hx = h(*x);
            *lw += hx * dy - 0.5 * hx * hx * dt;
            *x += (drift(*x) + u) * dt + sq * normal(rng);
        }
        self.t += dt;
        let max = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::blowup(self.t, "all particle weights underflowed"));
        }
        for lw in self.log_weights.iter_mut() {
            *lw -= max;
        }
        let w = self.weights();
        let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
        if !ess.is_finite() {
            return Err(Error::blowup(self.t, "particle weights degenerated"));
        }
        self.ess = ess.clamp(1.0, self.len() as f64);
        if self.ess < 0.5 * self.len() as f64 {
            self.resample(&w, rng);
        }
        Ok(())
    }

    fn resample<R: Rng + ?Sized>(&mut self, w: &[f64], rng: &mut R) {
        let n = self.len();
        let u0: f64 = rng.gen::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cum = w[0];
        let mut i = 0;
        for k in 0..n {
            let target = u0 + k as f64 / n as f64;
            while cum < target && i + 1 < n {
                i += 1;
                cum += w[i];
            }
            out.push(self.positions[i]);
        }
        self.positions = out;
        self.log_weights.iter_mut().for_each(|l| *l = 0.0);
        self.ess = n as f64;
    }
}

/// One particle-filter step for a scalar scenario against frozen measure `mu`.
#[allow(clippy::too_many_arguments)]
pub fn particle_filter_step<R: Rng + ?Sized>(
    c: &ParticleCloud,
    u: f64,
    dy: f64,
    dt: f64,
    scenario: &Scenario,
    mu: &Measure,
    rng: &mut R,
) -> Result<ParticleCloud> {
    let mut next = c.clone();
    let field = scenario.drift.frozen(c.t, mu);
    next.step(
        rng,
        scenario.controls.clip(u),
        dy,
        dt,
        scenario.sigma,
        |x| field.eval(x),
        |x| scenario.observation.eval(x),
    )?;
    Ok(next)
}
