use std::io::Write;

use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::measure_flow::Measure;

/// Geometry of a uniform spatial grid `[x_lo, x_hi]` with `nodes` nodes, plus
/// the weight exponent `k` of the `E_k` norm.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nodes: usize,
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_k() -> f64 {
    2.0
}

impl GridSpec {
    pub fn new(x_lo: f64, x_hi: f64, nodes: usize) -> Self {
        GridSpec {
            x_lo,
            x_hi,
            nodes,
            k: 2.0,
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nodes - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_lo + j as f64 * self.dx()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 || !(self.x_hi > self.x_lo) {
            return Err(Error::config("grid needs x_hi > x_lo and at least 3 nodes"));
        }
        if !(self.k >= 0.0) {
            return Err(Error::config("E_k weight exponent must be nonnegative"));
        }
        Ok(())
    }

    /// Largest admissible explicit step for diffusion `σ`: `σ² dt / dx² ≤ ½`.
    pub fn max_stable_dt(&self, sigma: f64) -> f64 {
        0.5 * self.dx() * self.dx() / (sigma * sigma)
    }
}

/// Unnormalised conditional density sampled at the nodes of a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub spec: GridSpec,
    values: Vec<f64>,
    mass: f64,
    pub t: f64,
}

impl DensityGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>, t: f64) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.nodes {
            return Err(Error::invalid("density values do not match the grid"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("density values must be finite and nonnegative"));
        }
        let mass = values.iter().sum::<f64>() * spec.dx();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("density mass must be finite and positive"));
        }
        Ok(DensityGrid {
            spec,
            values,
            mass,
            t,
        })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..spec.nodes).map(|j| f(spec.x(j))).collect();
        DensityGrid::new(spec, values, 0.0)
    }

    /// Normalised Gaussian density.
    pub fn gaussian(spec: GridSpec, mean: f64, var: f64) -> Result<Self> {
        let d = DensityGrid::from_fn(spec, |x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())?;
        normalize(&d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.spec.nodes).map(|j| self.spec.x(j))
    }

    /// Unnormalised pairing `⟨f, p⟩ = Σ f(x_j) p_j dx`.
    pub fn pair(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v * f(self.spec.x(j)))
            .sum::<f64>()
            * self.dx()
    }

    pub fn mean(&self) -> f64 {
        self.pair(|x| x) / self.mass
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pair(|x| (x - m) * (x - m)) / self.mass
    }

    /// `E_k` norm `∫ (1 + |x|^k) |p(x)| dx`.
    pub fn ek_norm(&self) -> f64 {
        let k = self.spec.k;
        self.pair(|x| 1.0 + x.abs().powf(k))
    }

    /// `E_k` distance between two densities on the same grid.
    pub fn ek_distance(&self, other: &DensityGrid) -> Result<f64> {
        self.check_same_grid(other)?;
        let k = self.spec.k;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(j, (a, b))| (1.0 + self.spec.x(j).abs().powf(k)) * (a - b).abs())
            .sum::<f64>()
            * self.dx())
    }

    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.dx())
    }

    fn check_same_grid(&self, other: &DensityGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::invalid("densities live on different grids"));
        }
        Ok(())
    }

    /// Share of the mass sitting in the two boundary cells.
    pub fn boundary_fraction(&self) -> f64 {
        (self.values[0] + self.values[self.spec.nodes - 1]) * self.dx() / self.mass
    }

    pub fn to_measure(&self) -> Result<Measure> {
        Measure::grid(self.spec.x_lo, self.dx(), self.values.clone())
    }

    /// CSV `(x, value)` preceded by a `# t=…,mass=…,k_norm=…` header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# t={},mass={},k_norm={}", self.t, self.mass, self.ek_norm())?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "value"])?;
        for (j, v) in self.values.iter().enumerate() {
            wr.write_record([self.spec.x(j).to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    fn rebuild(&self, values: Vec<f64>, t: f64) -> Result<DensityGrid> {
        let mass = values.iter().sum::<f64>() * self.dx();
        if !mass.is_finite() || mass > 1e300 {
            return Err(Error::blowup(t, "density mass overflow"));
        }
        if !(mass > 1e-300) {
            return Err(Error::blowup(t, "density mass underflow"));
        }
        Ok(DensityGrid {
            spec: self.spec,
            values,
            mass,
            t,
        })
    }
}

/// Divide by the mass so that `Σ p_j dx = 1`.
pub fn normalize(d: &DensityGrid) -> Result<DensityGrid> {
    if !(d.mass > 0.0) || !d.mass.is_finite() {
        return Err(Error::blowup(d.t, "cannot normalise a density of zero mass"));
    }
    let values: Vec<f64> = d.values.iter().map(|v| v / d.mass).collect();
    let mass = values.iter().sum::<f64>() * d.dx();
    Ok(DensityGrid {
        spec: d.spec,
        values,
        mass,
        t: d.t,
    })
}

/// Explicit finite-volume solver for the Zakai and Kushner equations of a
/// scalar state `dz = b(t, z) dt + σ dw` observed through `dy = h(z) dt + dν`.
///
/// The transport–diffusion part uses conservative interface fluxes (central
/// advection, switching to upwind where the cell Péclet number exceeds 2) with
/// zero flux through the outer boundaries, so mass is conserved to rounding
/// when `h ≡ 0`. The observation part multiplies each node by
/// `exp(h dy − ½ h² dt)`.
#[derive(Clone, Debug)]
pub struct ZakaiSolver {
    pub spec: GridSpec,
    pub sigma: f64,
    pub dt: f64,
    h_nodes: Vec<f64>,
    /// Abort when more than this share of mass sits in the boundary cells.
    pub boundary_tol: f64,
}

impl ZakaiSolver {
    pub fn new(spec: GridSpec, sigma: f64, dt: f64, h: impl Fn(f64) -> f64) -> Result<Self> {
        spec.validate()?;
        if !(sigma > 0.0) || !(dt > 0.0) {
            return Err(Error::config("Zakai solver needs σ > 0 and dt > 0"));
        }
        let cfl = sigma * sigma * dt / (spec.dx() * spec.dx());
        if cfl > 0.5 {
            return Err(Error::config(format!(
                "CFL bound violated: sigma^2 dt / dx^2 = {cfl:.4} > 0.5"
            )));
        }
        let h_nodes = (0..spec.nodes).map(|j| h(spec.x(j))).collect();
        Ok(ZakaiSolver {
            spec,
            sigma,
            dt,
            h_nodes,
            boundary_tol: 1e-6,
        })
    }

    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    /// Interface positions `x_{j+½}`, `j = 0..nodes−1`.
    pub fn interfaces(&self) -> Vec<f64> {
        let dx = self.spec.dx();
        (0..self.spec.nodes - 1)
            .map(|j| self.spec.x(j) + 0.5 * dx)
            .collect()
    }

    /// One explicit step of `∂_t p = ½σ² ∂²p − ∂_x(b p)` where
    /// `b = drift[j] + u` at interface `j`.
    pub fn transport(&self, values: &[f64], drift: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
        let n = self.spec.nodes;
        if drift.len() != n - 1 {
            return Err(Error::invalid("drift must be given at the n−1 interfaces"));
        }
        let dx = self.spec.dx();
        let diff = 0.5 * self.sigma * self.sigma;
        let mut flux = vec![0.0; n + 1];
        for j in 0..n - 1 {
            let v = drift[j] + u;
            let (a, b) = (values[j], values[j + 1]);
            let adv = if v.abs() * dx <= 2.0 * diff {
                0.5 * v * (a + b)
            } else if v > 0.0 {
                v * a
            } else {
                v * b
            };
            flux[j + 1] = adv - diff * (b - a) / dx;
        }
        let r = self.dt / dx;
        let mut out = Vec::with_capacity(n);
        let mut vmax: f64 = 0.0;
        for j in 0..n {
            let v = values[j] - r * (flux[j + 1] - flux[j]);
            vmax = vmax.max(v);
            out.push(v);
        }
        for v in out.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 * vmax.max(1e-300) {
                    log::warn!("t={t}: clamped negative density value {v:e}");
                }
                *v = 0.0;
            }
        }
        Ok(out)
    }

    /// Splitting step of the Zakai equation `dφ̃ = J* φ̃ dt + h φ̃ dy`.
    pub fn zakai_step(&self, d: &DensityGrid, drift: &[f64], u: f64, dy: f64) -> Result<DensityGrid> {
        let t = d.t + self.dt;
        let mut vals = self.transport(&d.values, drift, u, d.t)?;
        let dt = self.dt;
        for (v, h) in vals.iter_mut().zip(&self.h_nodes) {
            *v *= (h * dy - 0.5 * h * h * dt).exp();
        }
        let out = d.rebuild(vals, t)?;
        self.check_boundary(&out)?;
        Ok(out)
    }

    /// Normalised step driven by the innovation `dI = dy − ⟨h, p⟩ dt`; the
    /// multiplicative factor is `exp((h − h̄) dI − ½ (h − h̄)² dt)`.
    pub fn kushner_step(&self, d: &DensityGrid, drift: &[f64], u: f64, dy: f64) -> Result<DensityGrid> {
        let t = d.t + self.dt;
        let dt = self.dt;
        let hbar = {
            let s: f64 = d.values.iter().zip(&self.h_nodes).map(|(v, h)| v * h).sum();
            s * d.dx() / d.mass
        };
        let innovation = dy - hbar * dt;
        let mut vals = self.transport(&d.values, drift, u, d.t)?;
        for (v, h) in vals.iter_mut().zip(&self.h_nodes) {
            let c = h - hbar;
            *v *= (c * innovation - 0.5 * c * c * dt).exp();
        }
        let out = normalize(&d.rebuild(vals, t)?)?;
        self.check_boundary(&out)?;
        Ok(out)
    }

    fn check_boundary(&self, d: &DensityGrid) -> Result<()> {
        let frac = d.boundary_fraction();
        if frac > self.boundary_tol {
            return Err(Error::blowup(
                d.t,
                format!("{frac:e} of the mass reached the grid boundary"),
            ));
        }
        Ok(())
    }
}

/// Drift `f* = ∫ f†(t, x, y) μ(dy)` at the solver interfaces.
pub(crate) fn interface_drift(solver: &ZakaiSolver, scenario: &Scenario, t: f64, mu: &Measure) -> Vec<f64> {
    let field = scenario.drift.frozen(t, mu);
    solver.interfaces().into_iter().map(|x| field.eval(x)).collect()
}

/// One Zakai step for a scalar scenario against the frozen measure `mu`.
pub fn zakai_step(
    d: &DensityGrid,
    u: f64,
    dy: f64,
    dt: f64,
    scenario: &Scenario,
    mu: &Measure,
) -> Result<DensityGrid> {
    let solver = ZakaiSolver::new(d.spec, scenario.sigma, dt, |x| scenario.observation.eval(x))?;
    let drift = interface_drift(&solver, scenario, d.t, mu);
    solver.zakai_step(d, &drift, scenario.controls.clip(u), dy)
}

/// One Kushner step (normalised output) for a scalar scenario.
pub fn kushner_step(
    d: &DensityGrid,
    u: f64,
    dy: f64,
    dt: f64,
    scenario: &Scenario,
    mu: &Measure,
) -> Result<DensityGrid> {
    let solver = ZakaiSolver::new(d.spec, scenario.sigma, dt, |x| scenario.observation.eval(x))?;
    let drift = interface_drift(&solver, scenario, d.t, mu);
    solver.kushner_step(d, &drift, scenario.controls.clip(u), dy)
}
