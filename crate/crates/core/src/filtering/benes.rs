//! Two-dimensional model with a Beneš-type first component: the unnormalised
//! conditional density is `Γ(t, x₁) · e^λ · N(x; r, P)`, so the triple
//! `(r, P, λ)` is a sufficient statistic.
//!
//! Two filter modes are provided. `Literal` integrates the displayed ODE for
//! `r` (no observation term) together with `dP/dt = −P Q̃ P + G Gᵀ`.
//! `Innovation` adds the gain `K = P Hᵀ N⁻¹` driven by `dy − H r dt` and the
//! observation information `Hᵀ N⁻¹ H` in the Riccati equation; in that mode
//! the statistic reproduces the exact conditional density. Here `Q̃ =
//! diag(Q, 0)` and `m̃ = (m, 0)` because the potential acts on `x₁` only.

use std::io::Write;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::ControlSet;
use crate::error::{Error, Result};

/// `(c0 + slope·t)·exp(rate·t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub c0: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub rate: f64,
}

impl CoefficientPath {
    pub fn constant(c0: f64) -> Self {
        CoefficientPath {
            c0,
            slope: 0.0,
            rate: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.c0 + self.slope * t) * (self.rate * t).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.slope + self.rate * (self.c0 + self.slope * t)) * (self.rate * t).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenesMode {
    Literal,
    #[default]
    Innovation,
}

/// `l2 = q1 (z₁ − c1)² + q2 (z₂ − c2)² + γ (z₂ − y)² + ½ λ u²`, with `y`
/// distributed as the mean field (the law of `z₂`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticL2 {
    #[serde(default)]
    pub q1: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub q2: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub lam: f64,
}

impl QuadraticL2 {
    pub fn zero() -> Self {
        QuadraticL2 {
            q1: 0.0,
            c1: 0.0,
            q2: 0.0,
            c2: 0.0,
            gamma: 0.0,
            lam: 0.0,
        }
    }

    /// Pointwise cost against a mean field with mean `m` and variance `v`.
    pub fn eval(&self, z: [f64; 2], u: f64, m: f64, v: f64) -> f64 {
        self.q1 * (z[0] - self.c1).powi(2)
            + self.q2 * (z[1] - self.c2).powi(2)
            + self.gamma * ((z[1] - m).powi(2) + v)
            + 0.5 * self.lam * u * u
    }

    /// State part averaged over an information state with the given
    /// marginal moments.
    pub fn expected_state_cost(&self, mo: &BenesMoments, m: f64, v: f64) -> f64 {
        let e1 = mo.var[0] + (mo.mean[0] - self.c1).powi(2);
        let e2 = mo.var[1] + (mo.mean[1] - self.c2).powi(2);
        let e3 = mo.var[1] + (mo.mean[1] - m).powi(2) + v;
        self.q1 * e1 + self.q2 * e2 + self.gamma * e3
    }

    pub fn is_coupled(&self) -> bool {
        self.gamma != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.q1, self.c1, self.q2, self.c2, self.gamma, self.lam];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("cost coefficients must be finite"));
        }
        if self.lam < 0.0 {
            return Err(Error::config("control weight lam must be nonnegative"));
        }
        Ok(())
    }
}

/// All parameters of the two-dimensional model. Time-varying `H`, `N`, `G`
/// are not supported; `Q`, `m`, `δ`, `Δ`, `ς`, `η` are coefficient paths.
#[derive(Clone, Debug, PartialEq)]
pub struct BenesModel {
    pub g11: f64,
    pub g22: f64,
    pub h: Matrix2<f64>,
    pub nmat: Matrix2<f64>,
    pub q: CoefficientPath,
    pub m: CoefficientPath,
    pub delta: CoefficientPath,
    pub big_delta: CoefficientPath,
    pub varsigma: CoefficientPath,
    pub eta: CoefficientPath,
    pub p0: Matrix2<f64>,
    pub xi: Vector2<f64>,
    pub cost: QuadraticL2,
    pub controls: ControlSet,
    pub horizon: f64,
    pub dt: f64,
}

/// Mean and variance of each coordinate under the normalised information
/// state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenesMoments {
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

/// `(r, P, λ)` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SufficientStats {
    pub r: Vector2<f64>,
    pub p: Matrix2<f64>,
    pub lambda: f64,
    pub t: f64,
}

impl SufficientStats {
    pub fn initial(model: &BenesModel) -> Self {
        SufficientStats {
            r: model.xi,
            p: model.p0,
            lambda: 0.0,
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(self.p.iter()).all(|v| v.is_finite()) && self.lambda.is_finite()
    }
}

/// Rows `t,r1,r2,P11,P12,P22,lambda`.
pub fn write_stats_csv<W: Write>(rows: &[SufficientStats], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "r1", "r2", "P11", "P12", "P22", "lambda"])?;
    for s in rows {
        wr.write_record(&[
            s.t.to_string(),
            s.r[0].to_string(),
            s.r[1].to_string(),
            s.p[(0, 0)].to_string(),
            s.p[(0, 1)].to_string(),
            s.p[(1, 1)].to_string(),
            s.lambda.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

impl BenesModel {
    /// Quadratic family `Γ(t, x) = e^{δt/2}(½Δ₀x² + ς₀x + η₀ − ½(G¹¹)²Δ₀t)`
    /// with `Q = m = 0` and constant `δ`, which solves the potential equation
    /// exactly.
    #[allow(clippy::too_many_arguments)]
    pub fn quadratic_family(
        big_delta0: f64,
        varsigma0: f64,
        eta0: f64,
        delta: f64,
        g11: f64,
        g22: f64,
        h: Matrix2<f64>,
        nmat: Matrix2<f64>,
        p0: Matrix2<f64>,
        xi: Vector2<f64>,
        cost: QuadraticL2,
        controls: ControlSet,
        horizon: f64,
        dt: f64,
    ) -> Self {
        let rate = 0.5 * delta;
        BenesModel {
            g11,
            g22,
            h,
            nmat,
            q: CoefficientPath::constant(0.0),
            m: CoefficientPath::constant(0.0),
            delta: CoefficientPath::constant(delta),
            big_delta: CoefficientPath {
                c0: big_delta0,
                slope: 0.0,
                rate,
            },
            varsigma: CoefficientPath {
                c0: varsigma0,
                slope: 0.0,
                rate,
            },
            eta: CoefficientPath {
                c0: eta0,
                slope: -0.5 * g11 * g11 * big_delta0,
                rate,
            },
            p0,
            xi,
            cost,
            controls,
            horizon,
            dt,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn g(&self) -> Matrix2<f64> {
        Matrix2::new(self.g11, 0.0, 0.0, self.g22)
    }

    pub fn n_inv(&self) -> Result<Matrix2<f64>> {
        let det = self.nmat.determinant();
        if !(det.abs() > 1e-14) {
            return Err(Error::config("observation noise covariance N is singular"));
        }
        self.nmat
            .try_inverse()
            .ok_or_else(|| Error::config("observation noise covariance N is singular"))
    }

    /// `Q̃ = diag(Q_t, 0)`.
    pub fn q_tilde(&self, t: f64) -> Matrix2<f64> {
        Matrix2::new(self.q.value(t), 0.0, 0.0, 0.0)
    }

    /// Matrix multiplying `P` on both sides in the Riccati equation.
    pub fn riccati_weight(&self, t: f64, mode: BenesMode) -> Result<Matrix2<f64>> {
        let qt = self.q_tilde(t);
        Ok(match mode {
            BenesMode::Literal => qt,
            BenesMode::Innovation => qt + self.h.transpose() * self.n_inv()? * self.h,
        })
    }

    /// `Γ(t, x) = ½Δ_t x² + ς_t x + η_t`.
    pub fn gamma(&self, t: f64, x: f64) -> f64 {
        0.5 * self.big_delta.value(t) * x * x + self.varsigma.value(t) * x + self.eta.value(t)
    }

    fn gamma_coeffs(&self, t: f64) -> (f64, f64, f64) {
        (
            0.5 * self.big_delta.value(t),
            self.varsigma.value(t),
            self.eta.value(t),
        )
    }

    /// Whether `Γ(t, ·) > 0` on the whole line.
    pub fn gamma_positive_everywhere(&self, t: f64) -> bool {
        let (a, b, c) = self.gamma_coeffs(t);
        if a == 0.0 {
            b == 0.0 && c > 0.0
        } else {
            a > 0.0 && b * b - 4.0 * a * c < 0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g11 > 0.0 && self.g22 > 0.0) {
            return Err(Error::config("G11 and G22 must be positive"));
        }
        let nm = self.nmat;
        if (nm[(0, 1)] - nm[(1, 0)]).abs() > 1e-12 || !(nm[(0, 0)] > 0.0 && nm.determinant() > 0.0) {
            return Err(Error::config("N must be symmetric positive definite"));
        }
        let p = self.p0;
        if (p[(0, 1)] - p[(1, 0)]).abs() > 1e-12 || p[(0, 0)] < 0.0 || p.determinant() < -1e-14 {
            return Err(Error::config("P0 must be symmetric positive semidefinite"));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::config("dt and horizon must be positive"));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config(format!("horizon / dt = {steps} is not an integer")));
        }
        self.cost.validate()?;
        ControlSet::new(self.controls.min, self.controls.max)?;
        for t in self.times() {
            if !self.gamma_positive_everywhere(t) {
                return Err(Error::config(format!(
                    "Gamma(t, x) = 1/2 Delta x^2 + varsigma x + eta must stay positive; fails at t = {t}"
                )));
            }
        }
        Ok(())
    }

    /// Deterministic `P` path on the model grid.
    pub fn covariance_path(&self, mode: BenesMode) -> Result<Vec<Matrix2<f64>>> {
        let gg = self.g() * self.g().transpose();
        let mut p = self.p0;
        let mut out = vec![p];
        for k in 0..self.steps() {
            let t = k as f64 * self.dt;
            p = riccati_step(&p, &self.riccati_weight(t, mode)?, &gg, self.dt)?;
            out.push(p);
        }
        Ok(out)
    }

    /// Filter gain `P Hᵀ N⁻¹`.
    pub fn gain(&self, p: &Matrix2<f64>) -> Result<Matrix2<f64>> {
        Ok(p * self.h.transpose() * self.n_inv()?)
    }
}

fn psd_project(p: Matrix2<f64>) -> Matrix2<f64> {
    let sym = 0.5 * (p + p.transpose());
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|v| *v >= 0.0) {
        return sym;
    }
    let worst = eig.eigenvalues.min();
    if worst < -1e-12 {
        log::warn!("Riccati step produced eigenvalue {worst:e}; clamped to 0");
    }
    let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// One RK4 step of `dP/dt = −P W P + Σ` (`W`, `Σ` frozen over the step),
/// symmetrised and projected onto the PSD cone.
pub fn riccati_step(p: &Matrix2<f64>, w: &Matrix2<f64>, sigma: &Matrix2<f64>, dt: f64) -> Result<Matrix2<f64>> {
    let f = |p: &Matrix2<f64>| -p * w * p + sigma;
    let k1 = f(p);
    let k2 = f(&(p + 0.5 * dt * k1));
    let k3 = f(&(p + 0.5 * dt * k2));
    let k4 = f(&(p + dt * k3));
    let next = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Riccati step produced non-finite entries".into()));
    }
    Ok(psd_project(next))
}

/// Mean update over one step given the `P` at the start of the step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance_r(
    model: &BenesModel,
    r: &Vector2<f64>,
    p: &Matrix2<f64>,
    gain: Option<&Matrix2<f64>>,
    t: f64,
    u: f64,
    dy: &Vector2<f64>,
    dt: f64,
) -> Vector2<f64> {
    let qt = model.q_tilde(t);
    let mt = Vector2::new(model.m.value(t), 0.0);
    let ctrl = Vector2::new(0.0, u);
    match gain {
        None => r + (p * qt * r - p * mt + ctrl) * dt,
        Some(k) => r + (ctrl - p * (qt * r + mt)) * dt + k * (dy - model.h * r * dt),
    }
}

fn lambda_rate(model: &BenesModel, s: &SufficientStats) -> f64 {
    let t = s.t;
    let q = model.q.value(t);
    let r1 = s.r[0];
    0.5 * (q * r1 * r1 + 2.0 * model.m.value(t) * r1 + model.delta.value(t) + (s.p * model.q_tilde(t)).trace())
}

/// Advance `(r, P, λ)` over `[t, t + dt]`.
pub fn benes_filter_step(
    s: &SufficientStats,
    u: f64,
    dy: &Vector2<f64>,
    dt: f64,
    model: &BenesModel,
    mode: BenesMode,
) -> Result<SufficientStats> {
    let gain = match mode {
        BenesMode::Literal => None,
        BenesMode::Innovation => Some(model.gain(&s.p)?),
    };
    let r = advance_r(model, &s.r, &s.p, gain.as_ref(), s.t, u, dy, dt);
    let gg = model.g() * model.g().transpose();
    let p = riccati_step(&s.p, &model.riccati_weight(s.t, mode)?, &gg, dt)?;
    let next = SufficientStats {
        r,
        p,
        lambda: s.lambda + lambda_rate(model, s) * dt,
        t: s.t + dt,
    };
    if !next.is_finite() {
        return Err(Error::blowup(next.t, "sufficient statistics diverged"));
    }
    Ok(next)
}

fn gaussian_pdf2(x: &Vector2<f64>, r: &Vector2<f64>, p: &Matrix2<f64>) -> Result<f64> {
    let det = p.determinant();
    let inv = p
        .try_inverse()
        .filter(|_| det > 0.0)
        .ok_or_else(|| Error::Domain("P is singular".into()))?;
    let d = x - r;
    let q = (d.transpose() * inv * d)[(0, 0)];
    Ok((-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt()))
}

/// Unnormalised information state `e^{φ + λ} N(x; r, P)` with `e^φ = Γ`.
pub fn benes_density(s: &SufficientStats, model: &BenesModel, x: [f64; 2]) -> Result<f64> {
    let g = model.gamma(s.t, x[0]);
    if !(g > 0.0) {
        return Err(Error::Domain(format!("Gamma({}, {}) = {g} is not positive", s.t, x[0])));
    }
    Ok(g * s.lambda.exp() * gaussian_pdf2(&Vector2::new(x[0], x[1]), &s.r, &s.p)?)
}

/// `g(t, x) = (G¹¹)² (Δ_t x + ς_t) / Γ(t, x)`.
pub fn benes_drift(model: &BenesModel, t: f64, x: f64) -> Result<f64> {
    let g = model.gamma(t, x);
    if !(g > 0.0) {
        return Err(Error::Domain(format!("Gamma({t}, {x}) = {g} is not positive")));
    }
    Ok(model.g11 * model.g11 * (model.big_delta.value(t) * x + model.varsigma.value(t)) / g)
}

/// Gaussian raw moments `E[X^k]`, `k = 0..4`, for `X ~ N(r, s)`.
fn gaussian_raw_moments(r: f64, s: f64) -> [f64; 5] {
    [
        1.0,
        r,
        r * r + s,
        r * r * r + 3.0 * r * s,
        r.powi(4) + 6.0 * r * r * s + 3.0 * s * s,
    ]
}

/// Normalising constant `∫ Γ(t, x₁) N(x; r, P) dx` (without `e^λ`).
pub fn gamma_mass(s: &SufficientStats, model: &BenesModel) -> f64 {
    let (a, b, c) = model.gamma_coeffs(s.t);
    let e = gaussian_raw_moments(s.r[0], s.p[(0, 0)]);
    a * e[2] + b * e[1] + c
}

/// Marginal means and variances of the normalised information state.
pub fn benes_moments(s: &SufficientStats, model: &BenesModel) -> Result<BenesMoments> {
    let (a, b, c) = model.gamma_coeffs(s.t);
    let p11 = s.p[(0, 0)];
    let e = gaussian_raw_moments(s.r[0], p11);
    let z = a * e[2] + b * e[1] + c;
    if !(z > 0.0) {
        return Err(Error::Domain("information state has nonpositive mass".into()));
    }
    let m1 = (a * e[3] + b * e[2] + c * e[1]) / z;
    let s1 = (a * e[4] + b * e[3] + c * e[2]) / z;
    let v1 = (s1 - m1 * m1).max(0.0);
    let (beta, cond) = if p11 > 0.0 {
        let beta = s.p[(0, 1)] / p11;
        (beta, (s.p[(1, 1)] - beta * s.p[(0, 1)]).max(0.0))
    } else {
        (0.0, s.p[(1, 1)])
    };
    Ok(BenesMoments {
        mean: [m1, s.r[1] + beta * (m1 - s.r[0])],
        var: [v1, cond + beta * beta * v1],
    })
}

/// Normalised density of the `x₁` marginal.
pub fn benes_marginal_x1(s: &SufficientStats, model: &BenesModel, x: f64) -> f64 {
    let p11 = s.p[(0, 0)];
    let d = x - s.r[0];
    let n = (-0.5 * d * d / p11).exp() / (2.0 * std::f64::consts::PI * p11).sqrt();
    model.gamma(s.t, x) * n / gamma_mass(s, model)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Draw from the initial information state `∝ Γ(0, x₁) N(x; ξ, P₀)` given a
/// uniform `u1` (for `x₁`, by inversion of the closed-form CDF) and a standard
/// normal `n2` (for `x₂ | x₁`).
pub fn sample_initial(model: &BenesModel, u1: f64, n2: f64) -> Vector2<f64> {
    let (a, b, c) = model.gamma_coeffs(0.0);
    let p11 = model.p0[(0, 0)];
    let (r1, r2) = (model.xi[0], model.xi[1]);
    let x1 = if p11 <= 0.0 {
        r1
    } else {
        let s = p11.sqrt();
        // Γ(r1 + s ζ) = α ζ² + β ζ + γ0 in standardised coordinates.
        let alpha = a * p11;
        let beta = (2.0 * a * r1 + b) * s;
        let g0 = a * r1 * r1 + b * r1 + c;
        let total = g0 + alpha;
        let cdf = |z: f64| {
            let (phi, pdf) = (std_normal_cdf(z), std_normal_pdf(z));
            (g0 * phi - beta * pdf + alpha * (phi - z * pdf)) / total
        };
        let (mut lo, mut hi) = (-15.0, 15.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < u1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        r1 + s * 0.5 * (lo + hi)
    };
    let (beta, cond) = if p11 > 0.0 {
        let beta = model.p0[(0, 1)] / p11;
        (beta, (model.p0[(1, 1)] - beta * model.p0[(0, 1)]).max(0.0))
    } else {
        (0.0, model.p0[(1, 1)])
    };
    Vector2::new(x1, r2 + beta * (x1 - r1) + cond.sqrt() * n2)
}

/// Result of checking `∂_tφ + ½(G¹¹)²∂²φ + ½|G¹¹∂φ|² = ½(Q x² + 2 m x + δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiResidualReport {
    pub max_residual: f64,
    pub worst: (f64, f64),
    pub tolerance: f64,
    pub pass: bool,
}

/// Residual of the potential equation for `φ = log Γ`, using the analytic
/// time derivatives of the coefficient paths.
pub fn phi_residual_check(model: &BenesModel, grid: &[f64], times: &[f64], tolerance: f64) -> PhiResidualReport {
    let g2 = model.g11 * model.g11;
    let mut worst = (f64::NAN, f64::NAN);
    let mut max_residual: f64 = 0.0;
    for &t in times {
        let (dd, s, e) = (
            model.big_delta.value(t),
            model.varsigma.value(t),
            model.eta.value(t),
        );
        let (dd_t, s_t, e_t) = (
            model.big_delta.derivative(t),
            model.varsigma.derivative(t),
            model.eta.derivative(t),
        );
        for &x in grid {
            let gamma = 0.5 * dd * x * x + s * x + e;
            let res = if gamma > 0.0 {
                let phi_x = (dd * x + s) / gamma;
                let phi_xx = dd / gamma - phi_x * phi_x;
                let phi_t = (0.5 * dd_t * x * x + s_t * x + e_t) / gamma;
                let rhs = 0.5 * (model.q.value(t) * x * x + 2.0 * model.m.value(t) * x + model.delta.value(t));
                (phi_t + 0.5 * g2 * phi_xx + 0.5 * g2 * phi_x * phi_x - rhs).abs()
            } else {
                f64::INFINITY
            };
            if !(res <= max_residual) {
                max_residual = res;
                worst = (t, x);
            }
        }
    }
    PhiResidualReport {
        max_residual,
        worst,
        tolerance,
        pass: max_residual < tolerance,
    }
}
