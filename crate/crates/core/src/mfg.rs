//! Nash certainty equivalence: best response to a frozen flow, regenerate the
//! flow from the closed loop, repeat.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::control::{solve_hjb_sufficient_stats, HjbGrid, PolicyTable, StatsPolicy};
use crate::dynamics::{simulate_benes, BenesBundle};
use crate::error::{Error, Result};
use crate::filtering::{BenesMode, BenesModel, SufficientStats};
use crate::measure_flow::{path_distance_dt, sup_marginal_distance, MeasureFlow};

/// `Υ(μ)`: the HJB argmin policy against the frozen flow.
pub fn best_response_map(flow: &MeasureFlow, model: &BenesModel, grid: &HjbGrid, mode: BenesMode) -> Result<PolicyTable> {
    Ok(solve_hjb_sufficient_stats(model, flow, grid, mode)?.1)
}

fn induced_bundle(policy: &dyn StatsPolicy, model: &BenesModel, m: usize, seed: u64, mode: BenesMode) -> Result<BenesBundle> {
    simulate_benes(model, &[policy], m, seed, mode)
}

/// `Ῡ(α)`: empirical law of `z₂` over `m` closed-loop paths. The mean field
/// enters the model only through the cost, so the simulation needs no flow.
pub fn induced_flow_of_policy(
    policy: &dyn StatsPolicy,
    model: &BenesModel,
    m: usize,
    seed: u64,
    mode: BenesMode,
) -> Result<MeasureFlow> {
    Ok(induced_bundle(policy, model, m, seed, mode)?.induced_flow())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NceOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Paths per induced flow.
    pub paths: usize,
    pub seed: u64,
    /// Damping `θ` in `flow ← (1 − θ) flow + θ flow′`.
    pub theta: f64,
    pub mode: BenesMode,
    /// Paths kept for the full path-space distance of the final pair.
    pub dt_paths: usize,
}

impl Default for NceOptions {
    fn default() -> Self {
        NceOptions {
            tol: 1e-3,
            max_iter: 10,
            paths: 2000,
            seed: 0,
            theta: 1.0,
            mode: BenesMode::Innovation,
            dt_paths: 200,
        }
    }
}

/// Estimates of the sensitivity constants and their product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub c1: f64,
    pub c2: f64,
    pub product: f64,
    /// `c1 c2 < 1`.
    pub pass: bool,
    pub pairs_c1: usize,
    pub pairs_c2: usize,
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    /// Flows after each iteration; entry 0 is the primed initial flow.
    pub iterates: Vec<MeasureFlow>,
    /// `sup_t` marginal distance between successive iterates.
    pub distances: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Distances failed to decrease over 5 consecutive iterations.
    pub non_contractive: bool,
    /// Path-space distance between the last two closed loops, estimated on
    /// `dt_paths` paths.
    pub final_path_distance: f64,
    pub dt_paths: usize,
    pub paths: usize,
    pub policy: PolicyTable,
    pub gain_estimate: Option<GainEstimate>,
}

impl FixedPointReport {
    pub fn final_flow(&self) -> &MeasureFlow {
        self.iterates.last().expect("report has at least one iterate")
    }

    /// Whether every distance is strictly smaller than the one before.
    pub fn monotone(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    /// Columns `iteration,distance,c1_hat,c2_hat` (gain columns empty when
    /// not estimated).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "distance", "c1_hat", "c2_hat"])?;
        let (c1, c2) = match &self.gain_estimate {
            Some(g) => (g.c1.to_string(), g.c2.to_string()),
            None => (String::new(), String::new()),
        };
        for (i, d) in self.distances.iter().enumerate() {
            wr.write_record(&[(i + 1).to_string(), d.to_string(), c1.clone(), c2.clone()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Fixed-point iteration on the measure flow with common random numbers.
///
/// The initial flow is first pushed through the map once, so iteration 1
/// compares two flows that are both closed-loop laws; for a model whose cost
/// ignores the mean field this gives distance exactly 0 at iteration 1.
pub fn nce_iterate(
    initial_flow: &MeasureFlow,
    model: &BenesModel,
    grid: &HjbGrid,
    opts: &NceOptions,
) -> Result<FixedPointReport> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::config("nce needs tol > 0 and max_iter >= 1"));
    }
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::config("damping theta must lie in (0, 1]"));
    }
    let mode = opts.mode;
    let policy = best_response_map(initial_flow, model, grid, mode)?;
    let mut prev = induced_bundle(&policy, model, opts.paths, opts.seed, mode)?;
    let mut flow = prev.induced_flow();
    let mut iterates = vec![flow.clone()];
    let mut distances = Vec::new();
    let mut converged = false;
    let mut non_contractive = false;
    let mut last_policy = policy;
    let mut final_path_distance = 0.0;
    for it in 1..=opts.max_iter {
        let policy = best_response_map(&flow, model, grid, mode)?;
        let bundle = induced_bundle(&policy, model, opts.paths, opts.seed, mode)?;
        let next = bundle.induced_flow();
        let d = sup_marginal_distance(&flow, &next)?;
        log::info!("nce iteration {it}: distance {d:e}");
        distances.push(d);
        let keep = opts.dt_paths.min(opts.paths).max(1);
        final_path_distance = path_distance_dt(&prev.z2_paths()?.truncated(keep), &bundle.z2_paths()?.truncated(keep))?;
        flow = if opts.theta < 1.0 { flow.mix(&next, opts.theta)? } else { next };
        iterates.push(flow.clone());
        prev = bundle;
        last_policy = policy;
        let k = distances.len();
        if k >= 6 && distances[k - 6..].windows(2).all(|w| w[1] >= w[0]) {
            if !non_contractive {
                log::warn!("nce: distances non-decreasing over 5 consecutive iterations");
            }
            non_contractive = true;
        }
        if d < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointReport {
        iterations: distances.len(),
        iterates,
        distances,
        converged,
        non_contractive,
        final_path_distance,
        dt_paths: opts.dt_paths.min(opts.paths),
        paths: opts.paths,
        policy: last_policy,
        gain_estimate: None,
    })
}

/// Filter states visited by `paths` closed-loop agents, every `stride`
/// steps.
pub fn probe_states(
    model: &BenesModel,
    policy: &dyn StatsPolicy,
    paths: usize,
    stride: usize,
    seed: u64,
    mode: BenesMode,
) -> Result<Vec<SufficientStats>> {
    let b = simulate_benes(model, &[policy], paths, seed, mode)?;
    let ps = model.covariance_path(mode)?;
    let mut out = Vec::new();
    for i in 0..b.len() {
        for k in (0..b.times.len() - 1).step_by(stride.max(1)) {
            out.push(SufficientStats {
                r: nalgebra::Vector2::new(b.r1[i][k], b.r2[i][k]),
                p: ps[k],
                lambda: 0.0,
                t: b.times[k],
            });
        }
    }
    Ok(out)
}

fn policy_gap(a: &dyn StatsPolicy, b: &dyn StatsPolicy, probes: &[SufficientStats]) -> f64 {
    probes
        .iter()
        .map(|s| (a.control(s.t, s) - b.control(s.t, s)).abs())
        .fold(0.0, f64::max)
}

/// `ĉ1 = max sup_probes |u* − ũ*| / d(μ, μ̃)` over flow pairs and
/// `ĉ2 = max d(Ῡ(u*), Ῡ(ũ*)) / sup_probes |u* − ũ*|` over the induced
/// policies; pairs with a zero denominator are skipped. Both are maxima over
/// finite probes, hence lower bounds for the worst-case constants.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gain_constants(
    model: &BenesModel,
    grid: &HjbGrid,
    base_flow: &MeasureFlow,
    perturbations: &[MeasureFlow],
    probes: &[SufficientStats],
    paths: usize,
    seed: u64,
    mode: BenesMode,
) -> Result<GainEstimate> {
    if perturbations.len() < 2 {
        return Err(Error::invalid("need at least two perturbation flows"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("need probe states"));
    }
    let flows: Vec<&MeasureFlow> = std::iter::once(base_flow).chain(perturbations.iter()).collect();
    let policies = flows
        .iter()
        .map(|f| best_response_map(f, model, grid, mode))
        .collect::<Result<Vec<_>>>()?;
    let induced = policies
        .iter()
        .map(|p| induced_flow_of_policy(p, model, paths, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    let (mut c1, mut c2) = (0.0f64, 0.0f64);
    let (mut n1, mut n2) = (0, 0);
    for i in 0..flows.len() {
        for j in i + 1..flows.len() {
            let df = sup_marginal_distance(flows[i], flows[j])?;
            let du = policy_gap(&policies[i], &policies[j], probes);
            if df > 0.0 {
                c1 = c1.max(du / df);
                n1 += 1;
            } else {
                log::info!("gain estimate: flows {i} and {j} coincide; skipped");
            }
            if du > 0.0 {
                c2 = c2.max(sup_marginal_distance(&induced[i], &induced[j])? / du);
                n2 += 1;
            } else {
                log::info!("gain estimate: policies {i} and {j} coincide; skipped");
            }
        }
    }
    let product = c1 * c2;
    Ok(GainEstimate {
        c1,
        c2,
        product,
        pass: product < 1.0,
        pairs_c1: n1,
        pairs_c2: n2,
    })
}

/// The base flow shifted by each offset.
pub fn shifted_flows(base: &MeasureFlow, offsets: &[f64]) -> Vec<MeasureFlow> {
    offsets.iter().map(|c| base.shifted(*c)).collect()
}
