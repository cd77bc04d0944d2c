//! Monte Carlo audits of the `O(1/√N)` McKean–Vlasov approximation and of
//! the ε-Nash property of the mean field policy.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{
    benes_population_costs, evaluate_policy_dp, solve_hjb_with_field, FieldMoments, HjbGrid, Policy, PolicyTable,
    StatsDeviation, StatsPolicy,
};
use crate::dynamics::{simulate_benes, simulate_mckean_vlasov, simulate_population, Scenario, SimOptions};
use crate::error::{Error, Result};
use crate::filtering::{BenesMode, BenesModel};
use crate::measure_flow::MeasureFlow;
use crate::rng::derive_seed;
use crate::stats;

/// Gap between the population and its McKean–Vlasov copies as a function of
/// `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub n_values: Vec<usize>,
    /// `sup_t` of the agent- and replication-averaged `|z_i^N(t) − ẑ_i(t)|`.
    pub errors: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `sup_i sup_t` of the replication-averaged gap.
    pub sup_agent_errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub spearman: f64,
    pub replications: usize,
}

impl RateReport {
    /// Columns `N,error,stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "error", "stderr"])?;
        for ((n, e), s) in self.n_values.iter().zip(&self.errors).zip(&self.std_errors) {
            wr.write_record(&[n.to_string(), e.to_string(), s.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check_n_values(n_values: &[usize], lo: usize, hi: usize) -> Result<()> {
    if n_values.is_empty() || n_values.iter().any(|n| *n < lo || *n > hi) {
        return Err(Error::config(format!("N values must lie in [{lo}, {hi}]")));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("N values must be strictly increasing"));
    }
    Ok(())
}

/// For each `N`, simulate the population and `N` McKean–Vlasov copies driven
/// by `flow` on common noise, replication `r` using seed
/// `derive_seed(seed, [r])`. The agents' filters assume `flow` in both
/// systems, so the two differ only through the empirical coupling.
pub fn mv_rate_study(
    scenario: &Scenario,
    policy: &dyn Policy,
    flow: &MeasureFlow,
    n_values: &[usize],
    replications: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<RateReport> {
    check_n_values(n_values, 4, 4096)?;
    if replications < 4 {
        return Err(Error::config("need at least 4 replications"));
    }
    let opts = opts.clone().with_filter_flow(flow.clone()).without_noise();
    let (mut errors, mut ses, mut sups) = (Vec::new(), Vec::new(), Vec::new());
    for &n in n_values {
        let steps = scenario.steps() + 1;
        let mut per_rep: Vec<Vec<f64>> = Vec::with_capacity(replications);
        let mut per_agent = vec![vec![0.0; steps]; n];
        for r in 0..replications {
            let mut sc = scenario.clone();
            sc.seed = derive_seed(seed, &[r as u64]);
            let pop = simulate_population(&sc, &[policy], n, &opts)?;
            let mv = simulate_mckean_vlasov(&sc, policy, flow, n, &opts)?;
            let mut avg = vec![0.0; steps];
            for i in 0..n {
                for k in 0..steps {
                    let g = (pop.states[i][k] - mv.states[i][k]).abs();
                    avg[k] += g / n as f64;
                    per_agent[i][k] += g / replications as f64;
                }
            }
            per_rep.push(avg);
        }
        let (mut best, mut k_star) = (f64::NEG_INFINITY, 0);
        for k in 0..steps {
            let e = per_rep.iter().map(|a| a[k]).sum::<f64>() / replications as f64;
            if e > best {
                best = e;
                k_star = k;
            }
        }
        let at: Vec<f64> = per_rep.iter().map(|a| a[k_star]).collect();
        errors.push(best);
        ses.push(stats::std_error(&at));
        sups.push(per_agent.iter().flatten().cloned().fold(0.0, f64::max));
        log::info!("mv rate: N = {n}, error = {best:e}");
    }
    let lx: Vec<f64> = n_values.iter().map(|n| (*n as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, intercept) = if n_values.len() >= 2 {
        stats::linear_fit(&lx, &ly)
    } else {
        (f64::NAN, f64::NAN)
    };
    let nf: Vec<f64> = n_values.iter().map(|n| *n as f64).collect();
    Ok(RateReport {
        n_values: n_values.to_vec(),
        spearman: if n_values.len() >= 2 {
            stats::spearman(&nf, &errors)
        } else {
            f64::NAN
        },
        errors,
        std_errors: ses,
        sup_agent_errors: sups,
        slope,
        intercept,
        replications,
    })
}

/// `|∫x² dF_N − 2 z̄ ∫x dF_N + z̄²|` with `F_N` the empirical law of the
/// initial means.
pub fn epsilon_n(initial_means: &[f64], z_bar: f64) -> Result<f64> {
    if initial_means.is_empty() {
        return Err(Error::invalid("need at least one initial mean"));
    }
    let n = initial_means.len() as f64;
    let m1 = initial_means.iter().sum::<f64>() / n;
    let m2 = initial_means.iter().map(|x| x * x).sum::<f64>() / n;
    Ok((m2 - 2.0 * z_bar * m1 + z_bar * z_bar).abs())
}

/// Deviations tried by agent 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationBudget {
    /// Family (a): `u = clip(α u° + β)` over the grid `alphas × betas`.
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Family (b): best response re-solved against the realised flow of the
    /// other `N − 1` agents (reads that flow, not just the own filter).
    pub best_response: bool,
    pub replications: usize,
}

impl Default for DeviationBudget {
    fn default() -> Self {
        DeviationBudget {
            alphas: vec![0.5, 1.0, 1.5],
            betas: vec![-0.2, 0.0, 0.2],
            best_response: true,
            replications: 16,
        }
    }
}

impl DeviationBudget {
    fn size(&self) -> usize {
        self.alphas.len() * self.betas.len() + usize::from(self.best_response)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationResult {
    pub name: String,
    pub cost: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashGapReport {
    pub n: usize,
    /// Agent 1's baseline cost, conditional expectation given the others'
    /// paths computed by dynamic programming, averaged over replications.
    pub baseline_cost: f64,
    pub baseline_se: f64,
    /// Plain Monte Carlo population cost on the same seeds (all agents).
    pub baseline_cost_mc: f64,
    /// Cost of the mean field policy against the mean field itself.
    pub limit_cost: f64,
    pub best_deviation: String,
    pub best_deviation_cost: f64,
    /// `baseline − best deviation`; positive means a profitable deviation.
    pub gap: f64,
    pub gap_se: f64,
    /// `gap > 2·gap_se + 1e-6 (1 + |baseline|)`.
    pub profitable: bool,
    pub epsilon_n: f64,
    pub deviations: Vec<DeviationResult>,
}

/// Audit of unilateral deviations by agent 1 when the other `N − 1` agents
/// use `mfg_policy`. Agents interact only through the cost, so given the
/// others' realised `z₂` paths agent 1's expected cost under any filter
/// policy is a backward recursion on its own statistic; each replication
/// conditions on one simulated population. Deviation costs are thus computed
/// on common random numbers, and the gap standard error comes from the paired
/// per-replication differences.
#[allow(clippy::too_many_arguments)]
pub fn nash_gap(
    model: &BenesModel,
    grid: &HjbGrid,
    mfg_policy: &PolicyTable,
    flow: &MeasureFlow,
    n: usize,
    budget: &DeviationBudget,
    seed: u64,
    mode: BenesMode,
) -> Result<NashGapReport> {
    if n < 2 {
        return Err(Error::config("nash audit needs N >= 2"));
    }
    if budget.size() == 0 || budget.replications == 0 {
        return Err(Error::config("deviation budget must contain at least one deviation and one replication"));
    }
    let times = model.times();
    let xi = [model.xi[0], model.xi[1]];
    let base: Arc<dyn StatsPolicy> = Arc::new(mfg_policy.clone());
    let mut family: Vec<(String, StatsDeviation)> = Vec::new();
    for &a in &budget.alphas {
        for &b in &budget.betas {
            family.push((
                format!("affine(alpha={a},beta={b})"),
                StatsDeviation {
                    base: base.clone(),
                    alpha: a,
                    beta: b,
                },
            ));
        }
    }
    let mut names: Vec<String> = family.iter().map(|f| f.0.clone()).collect();
    if budget.best_response {
        names.push("best-response".into());
    }
    let mut cost = model.cost;
    cost.gamma *= (n - 1) as f64 / n as f64;

    let mut base_costs = Vec::with_capacity(budget.replications);
    let mut dev_costs = vec![Vec::with_capacity(budget.replications); names.len()];
    let mut mc = Vec::with_capacity(budget.replications);
    for r in 0..budget.replications {
        let b = simulate_benes(model, &[mfg_policy], n, derive_seed(seed, &[r as u64]), mode)?;
        mc.push(stats::mean(&benes_population_costs(model, &b)));
        let others = b.flow_of(1..n);
        let field = FieldMoments::from_flow(&others, &times);
        base_costs.push(evaluate_policy_dp(model, mfg_policy, &field, grid, mode, &cost)?.value(0, xi));
        for (d, (_, pol)) in family.iter().enumerate() {
            dev_costs[d].push(evaluate_policy_dp(model, pol, &field, grid, mode, &cost)?.value(0, xi));
        }
        if budget.best_response {
            let (v, _) = solve_hjb_with_field(model, &field, grid, mode, &cost)?;
            dev_costs[names.len() - 1].push(v.value(0, xi));
        }
    }
    let se = |xs: &[f64]| if xs.len() > 1 { stats::std_error(xs) } else { 0.0 };
    let deviations: Vec<DeviationResult> = names
        .iter()
        .zip(&dev_costs)
        .map(|(name, c)| DeviationResult {
            name: name.clone(),
            cost: stats::mean(c),
            std_error: se(c),
        })
        .collect();
    let best = deviations
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .expect("nonempty family");
    let baseline_cost = stats::mean(&base_costs);
    let diffs: Vec<f64> = base_costs.iter().zip(&dev_costs[best]).map(|(a, b)| a - b).collect();
    let gap = stats::mean(&diffs);
    let gap_se = se(&diffs);
    let limit_field = FieldMoments::from_flow(flow, &times);
    let limit_cost = evaluate_policy_dp(model, mfg_policy, &limit_field, grid, mode, &model.cost)?.value(0, xi);
    let epsilon = epsilon_n(&vec![model.xi[1]; n], model.xi[1])?;
    Ok(NashGapReport {
        n,
        baseline_cost,
        baseline_se: se(&base_costs),
        baseline_cost_mc: stats::mean(&mc),
        limit_cost,
        best_deviation: deviations[best].name.clone(),
        best_deviation_cost: deviations[best].cost,
        gap,
        gap_se,
        profitable: gap > 2.0 * gap_se + 1e-6 * (1.0 + baseline_cost.abs()),
        epsilon_n: epsilon,
        deviations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashRateReport {
    pub reports: Vec<NashGapReport>,
    /// Log-log slope of [`positive_part`]; `None` when fewer than two `N`
    /// have a positive gap.
    pub slope: Option<f64>,
    /// Smallest `C` with `gap⁺ ≤ ε_N + C/√N` at every tested `N`.
    pub constant: f64,
    pub any_profitable: bool,
    pub pass: bool,
    pub message: String,
}

impl NashRateReport {
    /// Columns `N,gap,epsilon_N,bound` with `bound = ε_N + C/√N`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["N", "gap", "epsilon_N", "bound"])?;
        for r in &self.reports {
            let bound = r.epsilon_n + self.constant / (r.n as f64).sqrt();
            wr.write_record(&[r.n.to_string(), r.gap.to_string(), r.epsilon_n.to_string(), bound.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `gap⁺`, with gaps at rounding level (`≤ 1e-12 (1 + |J|)`) counted as zero.
pub fn positive_part(r: &NashGapReport) -> f64 {
    if r.gap > 1e-12 * (1.0 + r.baseline_cost.abs()) {
        r.gap
    } else {
        0.0
    }
}

/// [`nash_gap`] across `n_values` with a log-log fit of the positive part.
#[allow(clippy::too_many_arguments)]
pub fn nash_rate_study(
    model: &BenesModel,
    grid: &HjbGrid,
    mfg_policy: &PolicyTable,
    flow: &MeasureFlow,
    n_values: &[usize],
    budget: &DeviationBudget,
    seed: u64,
    mode: BenesMode,
) -> Result<NashRateReport> {
    check_n_values(n_values, 2, 1 << 16)?;
    let reports = n_values
        .iter()
        .map(|&n| nash_gap(model, grid, mfg_policy, flow, n, budget, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    let any_profitable = reports.iter().any(|r| r.profitable);
    let pos: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| positive_part(r) > 0.0)
        .map(|r| ((r.n as f64).ln(), r.gap.ln()))
        .collect();
    let slope = if pos.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
        Some(stats::linear_fit(&x, &y).0)
    } else {
        None
    };
    let constant = reports
        .iter()
        .map(|r| (r.n as f64).sqrt() * (positive_part(r) - r.epsilon_n).max(0.0))
        .fold(0.0, f64::max);
    let (pass, message) = if !any_profitable {
        (true, "no profitable deviation detected at any N".to_string())
    } else {
        match slope {
            Some(s) => (s <= -0.3, format!("log-log slope of the positive gap {s:.3}")),
            None => (false, "profitable deviation found but slope undefined".to_string()),
        }
    };
    Ok(NashRateReport {
        reports,
        slope,
        constant,
        any_profitable,
        pass,
        message,
    })
}
