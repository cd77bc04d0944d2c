use std::io::Write;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::Policy;
use crate::error::{Error, Result};
use crate::filtering::{AgentFilter, DensityGrid, FilterMode, GaussianBelief, ParticleCloud, ZakaiSolver};
use crate::measure_flow::{Measure, MeasureFlow, PathEnsemble};
use crate::rng::{normal, stream, NoiseKind};

use super::model::{Drift, Scenario};

/// Sample paths of states, observations, controls and filter means on the
/// scenario grid. `state_noise[i][k]` and `obs_noise[i][k]` are the standard
/// normal draws behind the Brownian increments of step `k`; they are empty
/// when noise retention was switched off.
#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    pub state_noise: Vec<Vec<f64>>,
    pub obs_noise: Vec<Vec<f64>>,
    pub seed: u64,
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// States at grid index `k` across paths.
    pub fn states_at(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|p| p[k]).collect()
    }

    pub fn to_paths(&self) -> Result<PathEnsemble> {
        PathEnsemble::new(self.times.clone(), self.states.clone(), self.seed)
    }

    /// Columns `path_id,t,z,y,u`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "t", "z", "y", "u"])?;
        for i in 0..self.len() {
            for (k, t) in self.times.iter().enumerate() {
                wr.write_record(&[
                    i.to_string(),
                    t.to_string(),
                    self.states[i][k].to_string(),
                    self.observations[i][k].to_string(),
                    self.controls[i][k].to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// How a simulation run is instrumented.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub filter: FilterMode,
    /// Flow the agents' filters assume for the mean-field drift. `None`
    /// means the filters see the same measure that drives the states.
    pub filter_flow: Option<MeasureFlow>,
    pub retain_noise: bool,
}

impl SimOptions {
    pub fn new(filter: FilterMode) -> Self {
        SimOptions {
            filter,
            filter_flow: None,
            retain_noise: true,
        }
    }

    pub fn with_filter_flow(mut self, flow: MeasureFlow) -> Self {
        self.filter_flow = Some(flow);
        self
    }

    pub fn without_noise(mut self) -> Self {
        self.retain_noise = false;
        self
    }
}

enum Coupling<'a> {
    Empirical,
    Flow(&'a MeasureFlow),
}

struct Agent {
    z: f64,
    y: f64,
    filter: AgentFilter,
    w: ChaCha8Rng,
    v: ChaCha8Rng,
    zs: Vec<f64>,
    ys: Vec<f64>,
    us: Vec<f64>,
    est: Vec<f64>,
    dw: Vec<f64>,
    dv: Vec<f64>,
}

fn grid_solver(scenario: &Scenario, mode: &FilterMode) -> Result<Option<Arc<ZakaiSolver>>> {
    match mode {
        FilterMode::Grid(spec) => Ok(Some(Arc::new(ZakaiSolver::new(
            *spec,
            scenario.sigma,
            scenario.dt,
            |x| scenario.observation.eval(x),
        )?))),
        _ => Ok(None),
    }
}

/// Filter started from the agent's known prior `N(mean_i, var)`. Grid
/// filters need a resolvable prior, so the variance is floored at `(2dx)²`.
pub fn initial_filter(
    scenario: &Scenario,
    mode: &FilterMode,
    solver: Option<&Arc<ZakaiSolver>>,
    agent: usize,
) -> Result<AgentFilter> {
    let mean = scenario.init.mean_of(agent);
    let var = scenario.init.variance;
    Ok(match mode {
        FilterMode::Grid(spec) => {
            let solver = solver
                .cloned()
                .ok_or_else(|| Error::invalid("grid filter needs a solver"))?;
            let var = var.max((2.0 * spec.dx()).powi(2));
            AgentFilter::Grid {
                solver,
                density: DensityGrid::gaussian(*spec, mean, var)?,
            }
        }
        FilterMode::Particle { n } => {
            let mut rng = stream(scenario.seed, agent as u64, NoiseKind::Filter);
            let cloud = ParticleCloud::gaussian(*n, mean, var, &mut rng)?;
            AgentFilter::Particle { cloud, rng }
        }
        FilterMode::Kalman => AgentFilter::Kalman {
            belief: GaussianBelief { mean, var },
        },
    })
}

fn run(
    scenario: &Scenario,
    policies: &[&dyn Policy],
    n: usize,
    coupling: Coupling<'_>,
    opts: &SimOptions,
) -> Result<TrajectoryBundle> {
    scenario.validate()?;
    if n == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    if policies.is_empty() {
        return Err(Error::invalid("need at least one policy"));
    }
    let times = scenario.times();
    let steps = times.len() - 1;
    for flow in [opts.filter_flow.as_ref(), match coupling {
        Coupling::Flow(f) => Some(f),
        Coupling::Empirical => None,
    }]
    .into_iter()
    .flatten()
    {
        if flow.len() != times.len()
            || flow
                .times()
                .iter()
                .zip(&times)
                .any(|(a, b)| (a - b).abs() > 1e-9 * scenario.horizon)
        {
            return Err(Error::invalid("flow must live on the scenario time grid"));
        }
    }
    let solver = grid_solver(scenario, &opts.filter)?;
    let sqdt = scenario.dt.sqrt();
    let sd0 = scenario.init.variance.sqrt();
    let mut agents = (0..n)
        .map(|i| {
            let mut init = stream(scenario.seed, i as u64, NoiseKind::Initial);
            let z = scenario.init.mean_of(i) + sd0 * normal(&mut init);
            let cap = if opts.retain_noise { steps } else { 0 };
            Ok(Agent {
                z,
                y: 0.0,
                filter: initial_filter(scenario, &opts.filter, solver.as_ref(), i)?,
                w: stream(scenario.seed, i as u64, NoiseKind::State),
                v: stream(scenario.seed, i as u64, NoiseKind::Observation),
                zs: Vec::with_capacity(steps + 1),
                ys: Vec::with_capacity(steps + 1),
                us: Vec::with_capacity(steps + 1),
                est: Vec::with_capacity(steps + 1),
                dw: Vec::with_capacity(cap),
                dv: Vec::with_capacity(cap),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dt = scenario.dt;
    for (k, &t) in times.iter().enumerate() {
        let last = k == steps;
        let states: Vec<f64> = agents.iter().map(|a| a.z).collect();
        let empirical;
        let (drifts, state_mu): (Option<Vec<f64>>, &Measure) = match coupling {
            Coupling::Empirical => {
                empirical = Measure::uniform_unchecked(states.clone());
                (Some(scenario.drift.empirical(t, &states)), &empirical)
            }
            Coupling::Flow(flow) => (None, &flow.measures()[k]),
        };
        let filter_mu = opts
            .filter_flow
            .as_ref()
            .map(|f| &f.measures()[k])
            .unwrap_or(state_mu);
        let field = scenario.drift.frozen(t, filter_mu);
        let state_field = scenario.drift.frozen(t, state_mu);
        let grid_drift: Option<Vec<f64>> = solver
            .as_ref()
            .map(|s| s.interfaces().into_iter().map(|x| field.eval(x)).collect());

        let results: Vec<Result<()>> = agents
            .par_iter_mut()
            .enumerate()
            .map(|(i, a)| {
                let policy = policies[i % policies.len()];
                let u = scenario.controls.clip(policy.control(t, a.filter.state()));
                a.zs.push(a.z);
                a.ys.push(a.y);
                a.us.push(u);
                a.est.push(a.filter.state().mean());
                if last {
                    return Ok(());
                }
                let nw = normal(&mut a.w);
                let nv = normal(&mut a.v);
                if opts.retain_noise {
                    a.dw.push(nw);
                    a.dv.push(nv);
                }
                let dy = scenario.observation.eval(a.z) * dt + sqdt * nv;
                let f = match &drifts {
                    Some(d) => d[i],
                    None => state_field.eval(a.z),
                };
                a.z += (f + u) * dt + scenario.sigma * sqdt * nw;
                a.y += dy;
                a.filter.step(scenario, &field, grid_drift.as_deref(), u, dy)?;
                if !a.z.is_finite() {
                    return Err(Error::blowup(t + dt, format!("state of path {i} diverged")));
                }
                Ok(())
            })
            .collect();
        results.into_iter().collect::<Result<Vec<()>>>()?;
    }

    let mut bundle = TrajectoryBundle {
        times,
        states: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
        controls: Vec::with_capacity(n),
        estimates: Vec::with_capacity(n),
        state_noise: Vec::with_capacity(n),
        obs_noise: Vec::with_capacity(n),
        seed: scenario.seed,
    };
    for a in agents {
        bundle.states.push(a.zs);
        bundle.observations.push(a.ys);
        bundle.controls.push(a.us);
        bundle.estimates.push(a.est);
        bundle.state_noise.push(a.dw);
        bundle.obs_noise.push(a.dv);
    }
    Ok(bundle)
}

/// Euler–Maruyama for the `n` coupled agents; agent `i` uses
/// `policies[i mod len]` evaluated on its own filter.
pub fn simulate_population(
    scenario: &Scenario,
    policies: &[&dyn Policy],
    n: usize,
    opts: &SimOptions,
) -> Result<TrajectoryBundle> {
    run(scenario, policies, n, Coupling::Empirical, opts)
}

/// `m` independent copies of the McKean–Vlasov system driven by the frozen
/// `flow`. Path `j` draws the same noises as agent `j` of
/// [`simulate_population`].
pub fn simulate_mckean_vlasov(
    scenario: &Scenario,
    policy: &dyn Policy,
    flow: &MeasureFlow,
    m: usize,
    opts: &SimOptions,
) -> Result<TrajectoryBundle> {
    run(scenario, &[policy], m, Coupling::Flow(flow), opts)
}

/// Per-time empirical laws of the bundle's states.
pub fn induced_flow(bundle: &TrajectoryBundle) -> Result<MeasureFlow> {
    if bundle.is_empty() {
        return Err(Error::invalid("empty bundle"));
    }
    let measures = (0..bundle.times.len())
        .map(|k| Measure::uniform_unchecked(bundle.states_at(k)))
        .collect();
    Ok(MeasureFlow::new_unchecked(bundle.times.clone(), measures))
}

/// Mean of the McKean–Vlasov flow for an affine drift `a x + b y + c` when
/// every agent plays `u = −gain (x̂ − target)` on an unbiased filter: the
/// Euler recursion `m_{k+1} = m_k + dt ((a + b − gain) m_k + c + gain·target)`.
/// Exact while the control constraint is inactive (and for symmetric set-ups
/// where clipping cancels). Returned as Dirac measures, which is all an
/// affine drift or a Kalman filter reads from the flow.
pub fn affine_feedback_mean_flow(scenario: &Scenario, gain: f64, target: f64) -> Result<MeasureFlow> {
    scenario.validate()?;
    let (a, b, c) = match scenario.drift {
        Drift::Affine { a, b, c } => (a, b, c),
        Drift::Custom(_) => return Err(Error::config("mean recursion needs an affine drift")),
    };
    let mut m = scenario.init.means.iter().sum::<f64>() / scenario.init.means.len() as f64;
    let times = scenario.times();
    let mut measures = Vec::with_capacity(times.len());
    for _ in &times {
        measures.push(Measure::dirac(m));
        m += scenario.dt * ((a + b - gain) * m + c + gain * target);
    }
    MeasureFlow::new(times, measures)
}

/// Picard iteration for the consistent flow of the McKean–Vlasov system under
/// `policy`, starting from the constant flow at the initial mean. Each sweep
/// simulates `m` paths with the same seed and compresses the induced flow to
/// `atoms` quantile atoms.
pub fn consistent_flow(
    scenario: &Scenario,
    policy: &dyn Policy,
    m: usize,
    atoms: usize,
    sweeps: usize,
    opts: &SimOptions,
) -> Result<MeasureFlow> {
    let m0 = scenario.init.means.iter().sum::<f64>() / scenario.init.means.len() as f64;
    let mut flow = MeasureFlow::constant(scenario.times(), Measure::dirac(m0))?;
    let opts = opts.clone().without_noise();
    for sweep in 0..sweeps.max(1) {
        let mut o = opts.clone();
        if o.filter_flow.is_some() {
            o.filter_flow = Some(flow.clone());
        }
        let bundle = simulate_mckean_vlasov(scenario, policy, &flow, m, &o)?;
        let next = induced_flow(&bundle)?.compress(atoms);
        let d = crate::measure_flow::sup_marginal_distance(&flow, &next)?;
        log::debug!("consistent_flow sweep {sweep}: distance {d:e}");
        flow = next;
    }
    Ok(flow)
}
