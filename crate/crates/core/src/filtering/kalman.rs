//! Kalman–Bucy filter for the scalar linear model
//! `dz = (a z + b + u) dt + σ dw`, `dy = c z dt + √R dν`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    /// Observation noise variance.
    pub r: f64,
}

impl LinearModel {
    pub fn new(a: f64, c: f64, sigma: f64, r: f64) -> Self {
        LinearModel { a, b: 0.0, c, sigma, r }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::config("observation noise variance R must be positive"));
        }
        Ok(())
    }

    fn riccati_rhs(&self, v: f64) -> f64 {
        2.0 * self.a * v + self.sigma * self.sigma - v * v * self.c * self.c / self.r
    }

    /// RK4 step of the variance equation `v' = 2av + σ² − v²c²/R`.
    pub fn variance_step(&self, v: f64, dt: f64) -> f64 {
        let k1 = self.riccati_rhs(v);
        let k2 = self.riccati_rhs(v + 0.5 * dt * k1);
        let k3 = self.riccati_rhs(v + 0.5 * dt * k2);
        let k4 = self.riccati_rhs(v + dt * k3);
        v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Mean update over one step, with gain from the pre-step variance.
    pub fn mean_step(&self, m: f64, v: f64, u: f64, dy: f64, dt: f64) -> f64 {
        let gain = v * self.c / self.r;
        m + (self.a * m + self.b + u) * dt + gain * (dy - self.c * m * dt)
    }

    /// Stationary variance (positive root of `2av + σ² − v²c²/R = 0`).
    pub fn stationary_variance(&self) -> f64 {
        let q = self.c * self.c / self.r;
        if q == 0.0 {
            return if self.a < 0.0 {
                -self.sigma * self.sigma / (2.0 * self.a)
            } else {
                f64::INFINITY
            };
        }
        (self.a + (self.a * self.a + q * self.sigma * self.sigma).sqrt()) / q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanPath {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Posterior mean and variance along the observation increments `dy`
/// (`dy[k]` covers `[t_k, t_{k+1}]`); outputs have `dy.len() + 1` entries.
pub fn kalman_bucy_oracle(
    model: &LinearModel,
    dy: &[f64],
    dt: f64,
    m0: f64,
    v0: f64,
) -> Result<KalmanPath> {
    model.validate()?;
    let mut means = Vec::with_capacity(dy.len() + 1);
    let mut variances = Vec::with_capacity(dy.len() + 1);
    let (mut m, mut v) = (m0, v0);
    means.push(m);
    variances.push(v);
    for &d in dy {
        m = model.mean_step(m, v, 0.0, d, dt);
        v = model.variance_step(v, dt);
        means.push(m);
        variances.push(v);
    }
    Ok(KalmanPath { means, variances })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninformative_observation_follows_lyapunov() {
        let m = LinearModel::new(-0.5, 0.0, 1.0, 1.0);
        let dt = 1e-3;
        let p = kalman_bucy_oracle(&m, &vec![0.3; 1000], dt, 2.0, 0.2).unwrap();
        // v(t) = 1 + (v0 − 1) e^{−t}, mean 2 e^{−t/2} (Euler, so O(dt)).
        let t: f64 = 1.0;
        let v_exact = 1.0 + (0.2 - 1.0) * (-t).exp();
        assert!((p.variances[1000] - v_exact).abs() < 1e-10);
        assert!((p.means[1000] - 2.0 * (-0.5f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn stationary_variance_matches_algebraic_root() {
        let m = LinearModel::new(0.0, 2.0, 0.5, 0.25);
        // a = 0: v∞ = σ √R / c = 0.5 · 0.5 / 2.
        assert!((m.stationary_variance() - 0.125).abs() < 1e-15);
        let p = kalman_bucy_oracle(&m, &vec![0.0; 20000], 1e-3, 0.0, 3.0).unwrap();
        assert!((p.variances.last().unwrap() - 0.125).abs() < 1e-9);
    }

    #[test]
    fn precise_observations_shrink_variance() {
        let noisy = LinearModel::new(0.0, 1.0, 1.0, 1.0);
        let precise = LinearModel::new(0.0, 1.0, 1.0, 1e-2);
        let dy = vec![0.0; 1000];
        let a = kalman_bucy_oracle(&noisy, &dy, 1e-3, 0.0, 1.0).unwrap();
        let b = kalman_bucy_oracle(&precise, &dy, 1e-3, 0.0, 1.0).unwrap();
        let prior = 1.0 + 1.0;
        assert!(b.variances[1000] < 0.2 * a.variances[1000]);
        assert!(a.variances[1000] < prior);
    }

    #[test]
    fn nonpositive_noise_is_rejected() {
        let m = LinearModel::new(0.0, 1.0, 1.0, 0.0);
        assert!(matches!(
            kalman_bucy_oracle(&m, &[0.0], 0.1, 0.0, 1.0),
            Err(Error::Config(_))
        ));
    }
}
