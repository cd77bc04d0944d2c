use nalgebra::Vector2;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{normal, stream, NoiseKind};

use super::benes::{
    benes_density, benes_drift, benes_filter_step, sample_initial, BenesMode, BenesModel, SufficientStats,
};
use super::grid::GridSpec;

/// Normalised conditional density of the two-dimensional model on a
/// rectangular grid, advanced by a conservative explicit Fokker–Planck step
/// and a multiplicative observation correction. Used as a reference for the
/// finite-dimensional filter.
#[derive(Clone, Debug)]
pub struct BenesGrid {
    pub x1: GridSpec,
    pub x2: GridSpec,
    /// Row-major, `values[i * n2 + j]` at `(x1_i, x2_j)`.
    values: Vec<f64>,
    pub t: f64,
    boundary_tol: f64,
}

impl BenesGrid {
    /// Rectangle `ξ ± half_width` in both coordinates with `nodes` per axis.
    pub fn covering(model: &BenesModel, half_width: f64, nodes: usize) -> (GridSpec, GridSpec) {
        (
            GridSpec::new(model.xi[0] - half_width, model.xi[0] + half_width, nodes),
            GridSpec::new(model.xi[1] - half_width, model.xi[1] + half_width, nodes),
        )
    }

    /// The tilted prior `Γ(0, x₁) N(x; ξ, P₀)`.
    pub fn initial(model: &BenesModel, x1: GridSpec, x2: GridSpec) -> Result<Self> {
        x1.validate()?;
        x2.validate()?;
        let s = SufficientStats::initial(model);
        let mut values = Vec::with_capacity(x1.nodes * x2.nodes);
        for i in 0..x1.nodes {
            for j in 0..x2.nodes {
                values.push(benes_density(&s, model, [x1.x(i), x2.x(j)])?);
            }
        }
        let mut g = BenesGrid {
            x1,
            x2,
            values,
            t: 0.0,
            boundary_tol: 1e-6,
        };
        g.normalise()?;
        Ok(g)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell(&self) -> f64 {
        self.x1.dx() * self.x2.dx()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell()
    }

    fn normalise(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::blowup(self.t, "grid density lost its mass"));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    pub fn mean(&self) -> [f64; 2] {
        let n2 = self.x2.nodes;
        let (mut a, mut b) = (0.0, 0.0);
        for (idx, v) in self.values.iter().enumerate() {
            a += v * self.x1.x(idx / n2);
            b += v * self.x2.x(idx % n2);
        }
        [a * self.cell(), b * self.cell()]
    }

    /// Probability mass on the outermost ring of nodes.
    pub fn boundary_fraction(&self) -> f64 {
        let (n1, n2) = (self.x1.nodes, self.x2.nodes);
        let mut s = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                if i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1 {
                    s += self.values[i * n2 + j];
                }
            }
        }
        s * self.cell()
    }

    fn substeps(&self, model: &BenesModel, u: f64, dt: f64) -> usize {
        let (dx1, dx2) = (self.x1.dx(), self.x2.dx());
        let (d1, d2) = (0.5 * model.g11 * model.g11, 0.5 * model.g22 * model.g22);
        let diff = 2.0 * d1 / (dx1 * dx1) + 2.0 * d2 / (dx2 * dx2);
        let adv = model.g11.abs() / dx1 + u.abs() / dx2;
        let max_dt = 0.4 / (diff + adv);
        (dt / max_dt).ceil().max(1.0) as usize
    }

    fn transport(&mut self, model: &BenesModel, u: f64, h: f64) -> Result<()> {
        let (n1, n2) = (self.x1.nodes, self.x2.nodes);
        let (dx1, dx2) = (self.x1.dx(), self.x2.dx());
        let (d1, d2) = (0.5 * model.g11 * model.g11, 0.5 * model.g22 * model.g22);
        let b1: Vec<f64> = (0..n1 - 1)
            .map(|i| benes_drift(model, self.t, self.x1.x(i) + 0.5 * dx1))
            .collect::<Result<_>>()?;
        let p = &self.values;
        let mut next = p.clone();
        // Fluxes through interior interfaces; the outer boundary is closed.
        for i in 0..n1 - 1 {
            for j in 0..n2 {
                let (a, b) = (p[i * n2 + j], p[(i + 1) * n2 + j]);
                let f = b1[i] * 0.5 * (a + b) - d1 * (b - a) / dx1;
                next[i * n2 + j] -= h * f / dx1;
                next[(i + 1) * n2 + j] += h * f / dx1;
            }
        }
        for i in 0..n1 {
            for j in 0..n2 - 1 {
                let (a, b) = (p[i * n2 + j], p[i * n2 + j + 1]);
                let f = u * 0.5 * (a + b) - d2 * (b - a) / dx2;
                next[i * n2 + j] -= h * f / dx2;
                next[i * n2 + j + 1] += h * f / dx2;
            }
        }
        for v in next.iter_mut() {
            *v = v.max(0.0);
        }
        self.values = next;
        self.t += h;
        Ok(())
    }

    /// Advance over `[t, t + dt]` with control `u` and observation increment
    /// `dy`, then renormalise.
    pub fn step(&mut self, model: &BenesModel, u: f64, dy: &Vector2<f64>, dt: f64) -> Result<()> {
        let t_end = self.t + dt;
        let m = self.substeps(model, u, dt);
        let h = dt / m as f64;
        for _ in 0..m {
            self.transport(model, u, h)?;
        }
        self.t = t_end;
        let ninv = model.n_inv()?;
        let n2 = self.x2.nodes;
        let logw: Vec<f64> = (0..self.values.len())
            .map(|idx| {
                let hx = model.h * Vector2::new(self.x1.x(idx / n2), self.x2.x(idx % n2));
                (hx.transpose() * ninv * dy)[(0, 0)] - 0.5 * (hx.transpose() * ninv * hx)[(0, 0)] * dt
            })
            .collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (v, l) in self.values.iter_mut().zip(&logw) {
            *v *= (l - top).exp();
        }
        self.normalise()?;
        let frac = self.boundary_fraction();
        if frac > self.boundary_tol {
            return Err(Error::blowup(
                self.t,
                format!("grid density reached the boundary (mass fraction {frac:e})"),
            ));
        }
        Ok(())
    }

    /// `∫|p − q|` against the finite-dimensional state, both normalised by
    /// the same grid quadrature.
    pub fn l1_distance(&self, s: &SufficientStats, model: &BenesModel) -> Result<f64> {
        let n2 = self.x2.nodes;
        let q: Vec<f64> = (0..self.values.len())
            .map(|idx| benes_density(s, model, [self.x1.x(idx / n2), self.x2.x(idx % n2)]))
            .collect::<Result<_>>()?;
        let qm = q.iter().sum::<f64>() * self.cell();
        if !(qm > 0.0 && qm.is_finite()) {
            return Err(Error::Numerical("finite-dimensional density has no mass on the grid".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&q)
            .map(|(p, q)| (p - q / qm).abs())
            .sum::<f64>()
            * self.cell())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenesGridReport {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub grid_mean: Vec<[f64; 2]>,
    #[serde(skip)]
    pub stats: Vec<SufficientStats>,
}

impl BenesGridReport {
    pub fn l1_at_horizon(&self) -> f64 {
        *self.l1.last().expect("nonempty report")
    }
}

/// Run the finite-dimensional filter and the grid filter on one simulated
/// observation path (the signal driven by the constant control `u`, streams
/// as in path 0 of a simulated population) and record their `L1` distance.
pub fn benes_grid_comparison(
    model: &BenesModel,
    x1: GridSpec,
    x2: GridSpec,
    u: f64,
    seed: u64,
    mode: BenesMode,
) -> Result<BenesGridReport> {
    model.validate()?;
    let u = model.controls.clip(u);
    let n_half = model
        .nmat
        .cholesky()
        .ok_or_else(|| Error::config("N must be positive definite"))?
        .l();
    let dt = model.dt;
    let sq = dt.sqrt();
    let mut init = stream(seed, 0, NoiseKind::Initial);
    let u1: f64 = init.gen();
    let mut x = sample_initial(model, u1, normal(&mut init));
    let (mut w1, mut w2) = (stream(seed, 0, NoiseKind::State), stream(seed, 0, NoiseKind::StateAux));
    let (mut b1, mut b2) = (
        stream(seed, 0, NoiseKind::Observation),
        stream(seed, 0, NoiseKind::ObservationAux),
    );
    let mut grid = BenesGrid::initial(model, x1, x2)?;
    let mut s = SufficientStats::initial(model);
    let mut report = BenesGridReport {
        times: vec![0.0],
        l1: vec![grid.l1_distance(&s, model)?],
        grid_mean: vec![grid.mean()],
        stats: vec![s],
    };
    for k in 0..model.steps() {
        let t = k as f64 * dt;
        let db = Vector2::new(normal(&mut b1), normal(&mut b2)) * sq;
        let dy = model.h * x * dt + n_half * db;
        let g = benes_drift(model, t, x[0])?;
        x += Vector2::new(g * dt + model.g11 * sq * normal(&mut w1), u * dt + model.g22 * sq * normal(&mut w2));
        s = benes_filter_step(&s, u, &dy, dt, model, mode)?;
        s.t = (k + 1) as f64 * dt;
        grid.step(model, u, &dy, dt)?;
        report.times.push(s.t);
        report.l1.push(grid.l1_distance(&s, model)?);
        report.grid_mean.push(grid.mean());
        report.stats.push(s);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::benes::tests::model;
    use crate::filtering::QuadraticL2;

    #[test]
    fn initial_grid_matches_finite_dimensional_state() {
        let m = model(QuadraticL2::zero());
        let (a, b) = BenesGrid::covering(&m, 5.0, 101);
        let g = BenesGrid::initial(&m, a, b).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!(g.l1_distance(&SufficientStats::initial(&m), &m).unwrap() < 1e-12);
    }

    #[test]
    fn transport_conserves_mass() {
        let m = model(QuadraticL2::zero());
        let (a, b) = BenesGrid::covering(&m, 5.0, 61);
        let mut g = BenesGrid::initial(&m, a, b).unwrap();
        for _ in 0..20 {
            g.transport(&m, 0.7, 1e-3).unwrap();
        }
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }
}
