//! Backward dynamic programming for the value function on the reduced
//! information state `r` (with `P_t` deterministic and `λ_t` irrelevant to
//! the control).

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ControlSet;
use crate::error::{Error, Result};
use crate::filtering::{benes_moments, BenesMode, BenesModel, QuadraticL2, SufficientStats};
use crate::measure_flow::MeasureFlow;

use super::hamiltonian::argmin_tie_break;
use super::policy::StatsPolicy;

/// Uniform axis with `n ≥ 2` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 2 {
            return Err(Error::config("axis needs lo < hi and at least 2 nodes"));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.dx()
    }

    /// Cell index and weight of the right node; positions outside are clamped.
    fn locate(&self, x: f64) -> (usize, f64, bool) {
        let s = (x - self.lo) / self.dx();
        if s <= 0.0 {
            return (0, 0.0, s < -1e-9);
        }
        let top = (self.n - 1) as f64;
        if s >= top {
            return (self.n - 2, 1.0, s > top + 1e-9);
        }
        let i = (s.floor() as usize).min(self.n - 2);
        (i, s - i as f64, false)
    }
}

/// Discretisation of the HJB problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HjbGrid {
    pub r1: Axis,
    pub r2: Axis,
    /// Number of equally spaced control candidates.
    pub controls: usize,
}

impl HjbGrid {
    /// Box around `ξ` wide enough for `ξ ± 6√max P` plus the reach of the
    /// control over the horizon.
    pub fn covering(model: &BenesModel, mode: BenesMode, n1: usize, n2: usize, controls: usize) -> Result<Self> {
        let ps = model.covariance_path(mode)?;
        let (s1, s2) = max_sd(&ps);
        let reach = 0.5 * model.controls.min.abs().max(model.controls.max.abs()) * model.horizon;
        let w1 = 6.5 * s1 + 0.5;
        let w2 = 6.5 * s2 + reach + 0.5;
        Ok(HjbGrid {
            r1: Axis::new(model.xi[0] - w1, model.xi[0] + w1, n1)?,
            r2: Axis::new(model.xi[1] - w2, model.xi[1] + w2, n2)?,
            controls,
        })
    }

    fn len(&self) -> usize {
        self.r1.n * self.r2.n
    }
}

fn max_sd(ps: &[Matrix2<f64>]) -> (f64, f64) {
    ps.iter().fold((0.0f64, 0.0f64), |(a, b), p| {
        (a.max(p[(0, 0)].max(0.0).sqrt()), b.max(p[(1, 1)].max(0.0).sqrt()))
    })
}

/// Mean and variance of the mean field at each model time.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl FieldMoments {
    /// Sample the flow at the model times (last flow time `≤ t`).
    pub fn from_flow(flow: &MeasureFlow, times: &[f64]) -> Self {
        let (mut mean, mut var) = (Vec::new(), Vec::new());
        for &t in times {
            let mu = flow.at(t + 1e-9);
            mean.push(mu.mean());
            var.push(mu.variance());
        }
        FieldMoments { mean, var }
    }

    pub fn constant(m: f64, v: f64, len: usize) -> Self {
        FieldMoments {
            mean: vec![m; len],
            var: vec![v; len],
        }
    }
}

/// Bilinear table on `r1 × r2`, one slice per time.
#[derive(Clone, Debug, PartialEq)]
struct Table {
    r1: Axis,
    r2: Axis,
    slices: Vec<Vec<f64>>,
}

impl Table {
    fn interp(&self, k: usize, r: &Vector2<f64>) -> (f64, bool) {
        let (i, wi, ci) = self.r1.locate(r[0]);
        let (j, wj, cj) = self.r2.locate(r[1]);
        let n2 = self.r2.n;
        let v = &self.slices[k];
        let a = v[i * n2 + j];
        let b = v[i * n2 + j + 1];
        let c = v[(i + 1) * n2 + j];
        let d = v[(i + 1) * n2 + j + 1];
        let val = (1.0 - wi) * ((1.0 - wj) * a + wj * b) + wi * ((1.0 - wj) * c + wj * d);
        (val, ci || cj)
    }

    fn write_csv<W: Write>(&self, times: &[f64], column: &str, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "r1", "r2", column])?;
        for (k, slice) in self.slices.iter().enumerate() {
            for i in 0..self.r1.n {
                for j in 0..self.r2.n {
                    wr.write_record(&[
                        times[k].to_string(),
                        self.r1.x(i).to_string(),
                        self.r2.x(j).to_string(),
                        slice[i * self.r2.n + j].to_string(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `V(t_k, r)`; the slice at the horizon is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub times: Vec<f64>,
    table: Table,
}

impl ValueTable {
    pub fn r1(&self) -> Axis {
        self.table.r1
    }

    pub fn r2(&self) -> Axis {
        self.table.r2
    }

    /// Node value at time index `k`.
    pub fn node(&self, k: usize, i: usize, j: usize) -> f64 {
        self.table.slices[k][i * self.table.r2.n + j]
    }

    /// Bilinear value at time index `k`.
    pub fn value(&self, k: usize, r: [f64; 2]) -> f64 {
        self.table.interp(k, &Vector2::new(r[0], r[1])).0
    }

    /// Central-difference gradient `∂V/∂r` at a node (one-sided at edges).
    pub fn gradient(&self, k: usize, i: usize, j: usize) -> [f64; 2] {
        let (a1, a2) = (self.table.r1, self.table.r2);
        let d = |lo: (usize, usize), hi: (usize, usize), h: f64| {
            (self.node(k, hi.0, hi.1) - self.node(k, lo.0, lo.1)) / h
        };
        let (il, ih) = (i.saturating_sub(1), (i + 1).min(a1.n - 1));
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(a2.n - 1));
        [
            d((il, j), (ih, j), (ih - il) as f64 * a1.dx()),
            d((i, jl), (i, jh), (jh - jl) as f64 * a2.dx()),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.table.write_csv(&self.times, "V", w)
    }
}

/// Feedback `u*(t, r)`: multilinear in `r`, piecewise constant in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    pub times: Vec<f64>,
    pub controls: ControlSet,
    table: Table,
    lipschitz: f64,
}

impl PolicyTable {
    fn new(times: Vec<f64>, controls: ControlSet, table: Table) -> Self {
        let (a1, a2) = (table.r1, table.r2);
        let mut lip: f64 = 0.0;
        for s in &table.slices {
            for i in 0..a1.n {
                for j in 0..a2.n {
                    let u = s[i * a2.n + j];
                    if i + 1 < a1.n {
                        lip = lip.max((s[(i + 1) * a2.n + j] - u).abs() / a1.dx());
                    }
                    if j + 1 < a2.n {
                        lip = lip.max((s[i * a2.n + j + 1] - u).abs() / a2.dx());
                    }
                }
            }
        }
        PolicyTable {
            times,
            controls,
            table,
            lipschitz: lip,
        }
    }

    /// Largest difference quotient between neighbouring nodes.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn slice_index(&self, t: f64) -> usize {
        let dt = self.times[1] - self.times[0];
        let k = ((t - self.times[0]) / dt + 1e-9).floor();
        (k.max(0.0) as usize).min(self.table.slices.len() - 1)
    }

    pub fn control_at(&self, t: f64, r: [f64; 2]) -> f64 {
        let k = self.slice_index(t);
        self.controls.clip(self.table.interp(k, &Vector2::new(r[0], r[1])).0)
    }

    /// Largest node value difference against another table on the same grid.
    pub fn node_distance(&self, other: &PolicyTable) -> Result<f64> {
        if self.table.r1 != other.table.r1 || self.table.r2 != other.table.r2 {
            return Err(Error::invalid("policy tables live on different grids"));
        }
        Ok(self
            .table
            .slices
            .iter()
            .flatten()
            .zip(other.table.slices.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.table.write_csv(&self.times, "u", w)
    }
}

impl StatsPolicy for PolicyTable {
    fn control(&self, t: f64, s: &SufficientStats) -> f64 {
        self.control_at(t, [s.r[0], s.r[1]])
    }

    fn describe(&self) -> String {
        format!(
            "hjb-table({}x{} nodes, {} slices)",
            self.table.r1.n,
            self.table.r2.n,
            self.table.slices.len()
        )
    }
}

enum Choice<'a> {
    Optimize,
    Follow(&'a dyn StatsPolicy),
}

/// Drift of `r` without the control, evaluated at the node.
fn base_drift(
    model: &BenesModel,
    mode: BenesMode,
    s: &SufficientStats,
    gain_h: Option<&Matrix2<f64>>,
    mean: &Vector2<f64>,
) -> Vector2<f64> {
    let t = s.t;
    let qt = model.q_tilde(t);
    let mt = Vector2::new(model.m.value(t), 0.0);
    match mode {
        BenesMode::Literal => s.p * qt * s.r - s.p * mt,
        // Under the true law dy − H r dt = H (x̂ − r) dt + dI.
        BenesMode::Innovation => {
            let kh = gain_h.expect("innovation mode needs the gain");
            -(s.p * (qt * s.r + mt)) + kh * (mean - s.r)
        }
    }
}

/// Zero-mean points with weights `1/4` matching covariance `c`.
fn sigma_offsets(c: &Matrix2<f64>) -> Vec<Vector2<f64>> {
    let eig = SymmetricEigen::new(0.5 * (c + c.transpose()));
    let mut out = Vec::with_capacity(4);
    for i in 0..2 {
        let l = eig.eigenvalues[i].max(0.0);
        let v: Vector2<f64> = eig.eigenvectors.column(i).into();
        let d = v * (2.0 * l).sqrt();
        out.push(d);
        out.push(-d);
    }
    out
}

fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn backward(
    model: &BenesModel,
    field: &FieldMoments,
    grid: &HjbGrid,
    mode: BenesMode,
    cost: &QuadraticL2,
    choice: Choice<'_>,
) -> Result<(ValueTable, Table)> {
    model.validate()?;
    cost.validate()?;
    let times = model.times();
    let steps = times.len() - 1;
    if field.mean.len() < times.len() || field.var.len() < times.len() {
        return Err(Error::invalid("field moments must cover the model grid"));
    }
    let ps = model.covariance_path(mode)?;
    let (s1, s2) = max_sd(&ps);
    let (xi1, xi2) = (model.xi[0], model.xi[1]);
    if grid.r1.lo > xi1 - 6.0 * s1 || grid.r1.hi < xi1 + 6.0 * s1 || grid.r2.lo > xi2 - 6.0 * s2 || grid.r2.hi < xi2 + 6.0 * s2
    {
        return Err(Error::config("r grid must contain xi +/- 6 sqrt(max P)"));
    }
    if matches!(choice, Choice::Optimize) && grid.controls < 2 {
        return Err(Error::config("need at least 2 control candidates"));
    }
    let (n1, n2) = (grid.r1.n, grid.r2.n);
    let dt = model.dt;
    let u = model.controls;
    let mut cands = u.grid(grid.controls.max(2));
    if u.contains(0.0) {
        cands.push(0.0);
    }
    let du = (u.max - u.min) / (grid.controls.max(2) - 1) as f64;
    let clamped = AtomicUsize::new(0);

    let mut values = Table {
        r1: grid.r1,
        r2: grid.r2,
        slices: vec![vec![0.0; grid.len()]; steps + 1],
    };
    let mut policy = Table {
        r1: grid.r1,
        r2: grid.r2,
        slices: vec![vec![0.0; grid.len()]; steps + 1],
    };
    for k in (0..steps).rev() {
        let t = times[k];
        let p = ps[k];
        let (gain_h, offsets) = match mode {
            BenesMode::Literal => (None, vec![Vector2::zeros()]),
            BenesMode::Innovation => {
                let kg = model.gain(&p)?;
                let c = kg * model.nmat * kg.transpose() * dt;
                (Some(kg * model.h), sigma_offsets(&c))
            }
        };
        let w = 1.0 / offsets.len() as f64;
        let (m, v) = (field.mean[k], field.var[k]);
        let next = &values;
        let rows: Vec<Result<Vec<(f64, f64)>>> = (0..n1)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(n2);
                for j in 0..n2 {
                    let r = Vector2::new(grid.r1.x(i), grid.r2.x(j));
                    let s = SufficientStats {
                        r,
                        p,
                        lambda: 0.0,
                        t,
                    };
                    let mo = benes_moments(&s, model)?;
                    let mean = Vector2::new(mo.mean[0], mo.mean[1]);
                    let d0 = base_drift(model, mode, &s, gain_h.as_ref(), &mean);
                    let reach = [d0[0].abs() * dt, (d0[1].abs() + u.min.abs().max(u.max.abs())) * dt];
                    if reach[0] > grid.r1.dx() || reach[1] > grid.r2.dx() {
                        return Err(Error::config(format!(
                            "Courant condition violated at t = {t}: drift moves r by {reach:?} per step, grid spacing ({}, {})",
                            grid.r1.dx(),
                            grid.r2.dx()
                        )));
                    }
                    let running = cost.expected_state_cost(&mo, m, v) * dt;
                    let centre = r + d0 * dt;
                    let objective = |a: f64| {
                        let shift = centre + Vector2::new(0.0, a * dt);
                        let mut ev = 0.0;
                        let mut hit = false;
                        for o in &offsets {
                            let (val, c) = next.interp(k + 1, &(shift + o));
                            ev += w * val;
                            hit |= c;
                        }
                        (running + 0.5 * cost.lam * a * a * dt + ev, hit)
                    };
                    let (a, val, hit) = match &choice {
                        Choice::Follow(pol) => {
                            let a = u.clip(pol.control(t, &s));
                            let (val, hit) = objective(a);
                            (a, val, hit)
                        }
                        Choice::Optimize => {
                            let mut list: Vec<(f64, f64)> = cands.iter().map(|a| (*a, objective(*a).0)).collect();
                            if cost.lam > 0.0 {
                                let h = grid.r2.dx();
                                let dv = (next.interp(k + 1, &(centre + Vector2::new(0.0, h))).0
                                    - next.interp(k + 1, &(centre - Vector2::new(0.0, h))).0)
                                    / (2.0 * h);
                                let a = u.clip(-dv / cost.lam);
                                list.push((a, objective(a).0));
                            }
                            let (mut a, mut val) = argmin_tie_break(list);
                            let lo = (a - du).max(u.min);
                            let hi = (a + du).min(u.max);
                            let (ga, gv) = golden(|x| objective(x).0, lo, hi, 40);
                            if gv < val - 1e-13 * (1.0 + val.abs()) {
                                a = ga;
                                val = gv;
                            }
                            let hit = objective(a).1;
                            (a, val, hit)
                        }
                    };
                    if hit {
                        clamped.fetch_add(1, Ordering::Relaxed);
                    }
                    row.push((val, a));
                }
                Ok(row)
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (j, (val, a)) in row?.into_iter().enumerate() {
                values.slices[k][i * n2 + j] = val;
                policy.slices[k][i * n2 + j] = a;
            }
        }
    }
    policy.slices[steps] = policy.slices[steps - 1].clone();
    let c = clamped.into_inner();
    if c > 0 {
        log::info!("HJB: {c} node updates reached the r grid boundary and were clamped");
    }
    Ok((ValueTable { times, table: values }, policy))
}

/// Value and argmin tables of the reduced HJB problem against `flow` (the
/// law of `z₂`).
pub fn solve_hjb_sufficient_stats(
    model: &BenesModel,
    flow: &MeasureFlow,
    grid: &HjbGrid,
    mode: BenesMode,
) -> Result<(ValueTable, PolicyTable)> {
    let field = FieldMoments::from_flow(flow, &model.times());
    solve_hjb_with_field(model, &field, grid, mode, &model.cost)
}

/// As [`solve_hjb_sufficient_stats`] with explicit field moments and cost.
pub fn solve_hjb_with_field(
    model: &BenesModel,
    field: &FieldMoments,
    grid: &HjbGrid,
    mode: BenesMode,
    cost: &QuadraticL2,
) -> Result<(ValueTable, PolicyTable)> {
    let (v, p) = backward(model, field, grid, mode, cost, Choice::Optimize)?;
    let times = v.times.clone();
    Ok((v, PolicyTable::new(times, model.controls, p)))
}

/// Expected cost-to-go of a fixed policy by the same backward recursion.
pub fn evaluate_policy_dp(
    model: &BenesModel,
    policy: &dyn StatsPolicy,
    field: &FieldMoments,
    grid: &HjbGrid,
    mode: BenesMode,
    cost: &QuadraticL2,
) -> Result<ValueTable> {
    Ok(backward(model, field, grid, mode, cost, Choice::Follow(policy))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ZeroPolicy;
    use crate::filtering::CoefficientPath;
    use crate::measure_flow::Measure;

    fn model(cost: QuadraticL2) -> BenesModel {
        BenesModel::quadratic_family(
            1.0,
            0.5,
            2.0,
            0.0,
            1.0,
            0.5,
            Matrix2::identity(),
            Matrix2::from_diagonal(&Vector2::new(0.25, 0.25)),
            Matrix2::from_diagonal(&Vector2::new(0.5, 0.5)),
            Vector2::new(0.5, 1.0),
            cost,
            ControlSet::new(-2.0, 2.0).unwrap(),
            1.0,
            0.01,
        )
    }

    fn flow(m: &BenesModel) -> MeasureFlow {
        MeasureFlow::constant(m.times(), Measure::dirac(0.0)).unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_value_and_policy() {
        let m = model(QuadraticL2::zero());
        let g = HjbGrid::covering(&m, BenesMode::Innovation, 9, 21, 11).unwrap();
        let (v, p) = solve_hjb_sufficient_stats(&m, &flow(&m), &g, BenesMode::Innovation).unwrap();
        assert!(v.table.slices.iter().flatten().all(|x| *x == 0.0));
        assert!(p.table.slices.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn pure_control_penalty_gives_zero_policy() {
        let mut c = QuadraticL2::zero();
        c.lam = 1.0;
        let m = model(c);
        let g = HjbGrid::covering(&m, BenesMode::Innovation, 9, 21, 11).unwrap();
        let (v, p) = solve_hjb_sufficient_stats(&m, &flow(&m), &g, BenesMode::Innovation).unwrap();
        assert!(v.table.slices.iter().flatten().all(|x| *x == 0.0));
        assert!(p.table.slices.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn literal_lq_matches_riccati_solution() {
        let c = QuadraticL2 {
            q1: 0.0,
            c1: 0.0,
            q2: 1.0,
            c2: 0.0,
            gamma: 0.0,
            lam: 1.0,
        };
        let mut m = model(c);
        m.big_delta = CoefficientPath::constant(0.0);
        m.varsigma = CoefficientPath::constant(0.0);
        m.eta = CoefficientPath::constant(1.0);
        let g = HjbGrid::covering(&m, BenesMode::Literal, 9, 241, 41).unwrap();
        let (v, _) = solve_hjb_sufficient_stats(&m, &flow(&m), &g, BenesMode::Literal).unwrap();
        let s0 = (2f64.sqrt()).tanh() / 2f64.sqrt();
        // ∫₀¹ (0.5 + 0.25 t) dt.
        let exact = s0 * 1.0 + 0.625;
        let got = v.value(0, [0.5, 1.0]);
        assert!((got - exact).abs() < 0.02 * exact, "{got} vs {exact}");
    }

    #[test]
    fn policy_evaluation_of_optimum_reproduces_value() {
        let c = QuadraticL2 {
            q1: 0.0,
            c1: 0.0,
            q2: 1.0,
            c2: 0.0,
            gamma: 0.1,
            lam: 1.0,
        };
        let m = model(c);
        let g = HjbGrid::covering(&m, BenesMode::Innovation, 9, 41, 21).unwrap();
        let f = flow(&m);
        let (v, p) = solve_hjb_sufficient_stats(&m, &f, &g, BenesMode::Innovation).unwrap();
        let field = FieldMoments::from_flow(&f, &m.times());
        let ev = evaluate_policy_dp(&m, &p, &field, &g, BenesMode::Innovation, &m.cost).unwrap();
        let zero = evaluate_policy_dp(&m, &ZeroPolicy, &field, &g, BenesMode::Innovation, &m.cost).unwrap();
        let (a, b, z) = (v.value(0, [0.5, 1.0]), ev.value(0, [0.5, 1.0]), zero.value(0, [0.5, 1.0]));
        assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
        assert!(z > a);
        assert!(p.lipschitz().is_finite());
    }

    #[test]
    fn value_grows_with_horizon() {
        let c = QuadraticL2 {
            q1: 0.5,
            c1: 0.0,
            q2: 1.0,
            c2: 0.0,
            gamma: 0.1,
            lam: 1.0,
        };
        let short = {
            let mut m = model(c);
            m.horizon = 0.5;
            m
        };
        let long = model(c);
        let g = HjbGrid::covering(&long, BenesMode::Innovation, 9, 41, 21).unwrap();
        let (vs, _) = solve_hjb_sufficient_stats(&short, &flow(&short), &g, BenesMode::Innovation).unwrap();
        let (vl, _) = solve_hjb_sufficient_stats(&long, &flow(&long), &g, BenesMode::Innovation).unwrap();
        for i in 0..g.r1.n {
            for j in 0..g.r2.n {
                assert!(vs.node(0, i, j) <= vl.node(0, i, j) + 1e-12);
            }
        }
    }

    #[test]
    fn courant_violation_is_a_config_error() {
        let mut c = QuadraticL2::zero();
        c.lam = 1.0;
        let m = model(c);
        let mut g = HjbGrid::covering(&m, BenesMode::Innovation, 9, 21, 11).unwrap();
        g.r2 = Axis::new(g.r2.lo, g.r2.hi, 4000).unwrap();
        assert!(matches!(
            solve_hjb_sufficient_stats(&m, &flow(&m), &g, BenesMode::Innovation),
            Err(Error::Config(_))
        ));
    }
}
