use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{CostForm, StateCost};
use crate::dynamics::{ControlSet, Drift, InitialLaw, Observation, Scenario};
use crate::error::{Error, Result};
use crate::filtering::{BenesMode, BenesModel, FilterMode, GridSpec, QuadraticL2};
use crate::nash::DeviationBudget;

pub const PRESETS: &[&str] = &[
    "driftless",
    "linear-gaussian",
    "mean-reversion-coupled",
    "benes-quadratic",
    "benes-coupling-free",
    "benes-strong",
];

/// Scalar model `dz = (a z + b ∫y dμ + c + u) dt + σ dw`, `dy = (c_h z + d_h) dt + dv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub sigma: Option<f64>,
    pub drift_a: Option<f64>,
    pub drift_b: Option<f64>,
    pub drift_c: Option<f64>,
    pub obs_c: Option<f64>,
    pub obs_d: Option<f64>,
    pub control_min: Option<f64>,
    pub control_max: Option<f64>,
    pub init_means: Option<Vec<f64>>,
    pub init_variance: Option<f64>,
    /// `weight (x − target)² + gamma (x − y)²`.
    pub cost_weight: Option<f64>,
    pub cost_target: Option<f64>,
    pub cost_gamma: Option<f64>,
    pub control_penalty: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// `grid`, `particle` or `kalman`.
    pub kind: Option<String>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub nodes: Option<usize>,
    pub k: Option<f64>,
    pub particles: Option<usize>,
    pub snapshots: Option<usize>,
}

/// Two-dimensional model with the quadratic `Γ` family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenesSection {
    pub big_delta0: Option<f64>,
    pub varsigma0: Option<f64>,
    pub eta0: Option<f64>,
    pub delta: Option<f64>,
    pub g11: Option<f64>,
    pub g22: Option<f64>,
    pub h: Option<[[f64; 2]; 2]>,
    pub noise: Option<[[f64; 2]; 2]>,
    pub p0: Option<[[f64; 2]; 2]>,
    pub xi: Option<[f64; 2]>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub control_min: Option<f64>,
    pub control_max: Option<f64>,
    pub q1: Option<f64>,
    pub c1: Option<f64>,
    pub q2: Option<f64>,
    pub c2: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// `innovation` or `literal`.
    pub mode: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub agents: Option<usize>,
    pub replications: Option<usize>,
    pub n_values: Option<Vec<usize>>,
    pub paths: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub theta: Option<f64>,
    pub dt_paths: Option<usize>,
    pub r1_nodes: Option<usize>,
    pub r2_nodes: Option<usize>,
    pub control_nodes: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub best_response: Option<bool>,
    pub gain_check: Option<bool>,
    pub policy_gain: Option<f64>,
    pub policy_target: Option<f64>,
}

/// Configuration file as written; every key optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub benes: BenesSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RawConfig {
    /// Keys set in `top` replace those in `self`.
    fn overlay(mut self, top: &RawConfig) -> RawConfig {
        overlay!(self, top; preset, seed);
        overlay!(self.model, top.model; horizon, dt, sigma, drift_a, drift_b, drift_c, obs_c, obs_d,
            control_min, control_max, init_means, init_variance, cost_weight, cost_target, cost_gamma,
            control_penalty);
        overlay!(self.filter, top.filter; kind, x_lo, x_hi, nodes, k, particles, snapshots);
        overlay!(self.benes, top.benes; big_delta0, varsigma0, eta0, delta, g11, g22, h, noise, p0, xi,
            horizon, dt, control_min, control_max, q1, c1, q2, c2, gamma, lambda, mode);
        overlay!(self.experiment, top.experiment; agents, replications, n_values, paths, tol, max_iter,
            theta, dt_paths, r1_nodes, r2_nodes, control_nodes, alphas, betas, best_response, gain_check,
            policy_gain, policy_target);
        self
    }

    /// Sha-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Keys fixed by a named preset.
pub fn preset(name: &str) -> Result<RawConfig> {
    let mut c = RawConfig {
        preset: Some(name.to_string()),
        ..RawConfig::default()
    };
    match name {
        "driftless" => {}
        "linear-gaussian" => {
            c.model.drift_a = Some(-0.5);
            c.model.init_means = Some(vec![1.0]);
            c.model.init_variance = Some(0.5);
        }
        "mean-reversion-coupled" => {
            c.model.drift_a = Some(-0.5);
            c.model.drift_b = Some(0.5);
            c.model.dt = Some(0.005);
            c.model.init_means = Some(vec![-1.0, 1.0]);
            c.filter.kind = Some("kalman".into());
            c.experiment.replications = Some(8);
        }
        "benes-quadratic" => c.benes.gamma = Some(0.1),
        "benes-coupling-free" => c.benes.gamma = Some(0.0),
        "benes-strong" => c.benes.gamma = Some(-0.9),
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(c)
}

/// Validated configuration with defaults filled in.
#[derive(Clone, Debug)]
pub struct Config {
    /// Effective keys after the preset and overrides, used for the hash.
    pub raw: RawConfig,
    pub seed: u64,
    pub scenario: Scenario,
    pub filter: FilterMode,
    pub snapshots: usize,
    pub benes: BenesModel,
    pub mode: BenesMode,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub agents: usize,
    pub replications: usize,
    pub n_values: Option<Vec<usize>>,
    pub paths: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub theta: f64,
    pub dt_paths: usize,
    pub r1_nodes: usize,
    pub r2_nodes: usize,
    pub control_nodes: usize,
    pub budget: DeviationBudget,
    pub gain_check: bool,
    pub policy_gain: f64,
    pub policy_target: f64,
}

/// Line of the first `key = ...` assignment, 1-based.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

struct Checker<'a> {
    src: &'a str,
}

impl Checker<'_> {
    fn fail(&self, key: &str, rule: impl std::fmt::Display) -> Error {
        match line_of(self.src, key) {
            Some(line) => Error::config(format!("line {line}, key `{key}`: {rule}")),
            None => Error::config(format!("key `{key}`: {rule}")),
        }
    }

    fn require(&self, ok: bool, key: &str, rule: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(key, rule))
        }
    }
}

fn matrix(a: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

/// Parse a TOML configuration, apply `preset` (the file's own `preset` key
/// otherwise) and `seed` overrides, and validate.
pub fn parse_config(src: &str, preset_override: Option<&str>, seed_override: Option<u64>) -> Result<Config> {
    let user: RawConfig = toml::from_str(src).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
    let name = preset_override.map(str::to_string).or_else(|| user.preset.clone());
    let mut raw = match &name {
        Some(n) => preset(n)?.overlay(&user),
        None => user,
    };
    raw.preset = name;
    if seed_override.is_some() {
        raw.seed = seed_override;
    }
    resolve(raw, src)
}

pub fn load_config(path: Option<&Path>, preset_override: Option<&str>, seed_override: Option<u64>) -> Result<Config> {
    let src = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config(&src, preset_override, seed_override)
}

fn resolve(raw: RawConfig, src: &str) -> Result<Config> {
    let ck = Checker { src };
    let seed = raw.seed.unwrap_or(0);
    let m = &raw.model;
    let horizon = m.horizon.unwrap_or(1.0);
    let dt = m.dt.unwrap_or(1e-3);
    let sigma = m.sigma.unwrap_or(1.0);
    ck.require(sigma > 0.0, "sigma", "sigma must be positive")?;
    ck.require(horizon > 0.0, "horizon", "horizon must be positive")?;
    ck.require(dt > 0.0 && dt <= horizon, "dt", "dt must lie in (0, horizon]")?;
    let steps = horizon / dt;
    ck.require(
        (steps - steps.round()).abs() <= 1e-9 * steps.max(1.0),
        "dt",
        "horizon / dt must be an integer",
    )?;
    let (umin, umax) = (m.control_min.unwrap_or(-2.0), m.control_max.unwrap_or(2.0));
    ck.require(umin < umax, "control_max", "control interval needs control_min < control_max")?;
    let variance = m.init_variance.unwrap_or(0.25);
    ck.require(variance >= 0.0, "init_variance", "initial variance must be nonnegative")?;
    let means = m.init_means.clone().unwrap_or_else(|| vec![0.0]);
    ck.require(
        !means.is_empty() && means.iter().all(|x| x.is_finite()),
        "init_means",
        "initial means must be a nonempty list of finite numbers",
    )?;
    let lam = m.control_penalty.unwrap_or(1.0);
    ck.require(lam >= 0.0, "control_penalty", "control penalty must be nonnegative")?;
    let scenario = Scenario {
        horizon,
        dt,
        drift: Drift::Affine {
            a: m.drift_a.unwrap_or(0.0),
            b: m.drift_b.unwrap_or(0.0),
            c: m.drift_c.unwrap_or(0.0),
        },
        sigma,
        observation: Observation::Linear {
            c: m.obs_c.unwrap_or(1.0),
            d: m.obs_d.unwrap_or(0.0),
        },
        cost: CostForm::new(
            StateCost::Quadratic {
                weight: m.cost_weight.unwrap_or(1.0),
                target: m.cost_target.unwrap_or(0.0),
                gamma: m.cost_gamma.unwrap_or(0.0),
            },
            lam,
        )
        .map_err(|e| ck.fail("control_penalty", e))?,
        controls: ControlSet::new(umin, umax)?,
        init: InitialLaw::new(means, variance)?,
        seed,
    };

    let f = &raw.filter;
    let k = f.k.unwrap_or(2.0);
    ck.require(k >= 0.0, "k", "E_k weight exponent must be nonnegative")?;
    let filter = match f.kind.as_deref().unwrap_or("grid") {
        "grid" => {
            let spec = GridSpec {
                x_lo: f.x_lo.unwrap_or(-10.0),
                x_hi: f.x_hi.unwrap_or(10.0),
                nodes: f.nodes.unwrap_or(400),
                k,
            };
            ck.require(spec.x_hi > spec.x_lo, "x_hi", "grid needs x_hi > x_lo")?;
            ck.require(spec.nodes >= 3, "nodes", "grid needs at least 3 nodes")?;
            let cfl = sigma * sigma * dt / (spec.dx() * spec.dx());
            if cfl > 0.5 {
                return Err(ck.fail(
                    "nodes",
                    format!("CFL bound violated: sigma^2 dt / dx^2 = {cfl:.4} > 0.5"),
                ));
            }
            FilterMode::Grid(spec)
        }
        "particle" => {
            let n = f.particles.unwrap_or(1000);
            ck.require(n >= 1, "particles", "need at least one particle")?;
            FilterMode::Particle { n }
        }
        "kalman" => FilterMode::Kalman,
        other => return Err(ck.fail("kind", format!("unknown filter kind `{other}` (grid, particle, kalman)"))),
    };

    let b = &raw.benes;
    let mode = match b.mode.as_deref().unwrap_or("innovation") {
        "innovation" => BenesMode::Innovation,
        "literal" => BenesMode::Literal,
        other => return Err(ck.fail("mode", format!("unknown filter mode `{other}` (innovation, literal)"))),
    };
    let (bmin, bmax) = (b.control_min.unwrap_or(-2.0), b.control_max.unwrap_or(2.0));
    ck.require(bmin < bmax, "control_max", "control interval needs control_min < control_max")?;
    let bh = b.horizon.unwrap_or(1.0);
    let bdt = b.dt.unwrap_or(0.01);
    ck.require(bh > 0.0 && bdt > 0.0 && bdt <= bh, "dt", "benes dt must lie in (0, horizon]")?;
    let bsteps = bh / bdt;
    ck.require(
        (bsteps - bsteps.round()).abs() <= 1e-9 * bsteps.max(1.0),
        "dt",
        "horizon / dt must be an integer",
    )?;
    let xi = b.xi.unwrap_or([0.5, 1.0]);
    let benes = BenesModel::quadratic_family(
        b.big_delta0.unwrap_or(1.0),
        b.varsigma0.unwrap_or(0.5),
        b.eta0.unwrap_or(2.0),
        b.delta.unwrap_or(0.0),
        b.g11.unwrap_or(1.0),
        b.g22.unwrap_or(0.5),
        matrix(b.h.unwrap_or([[1.0, 0.0], [0.0, 1.0]])),
        matrix(b.noise.unwrap_or([[0.25, 0.0], [0.0, 0.25]])),
        matrix(b.p0.unwrap_or([[0.5, 0.0], [0.0, 0.5]])),
        Vector2::new(xi[0], xi[1]),
        QuadraticL2 {
            q1: b.q1.unwrap_or(0.0),
            c1: b.c1.unwrap_or(0.0),
            q2: b.q2.unwrap_or(1.0),
            c2: b.c2.unwrap_or(0.0),
            gamma: b.gamma.unwrap_or(0.1),
            lam: b.lambda.unwrap_or(1.0),
        },
        ControlSet::new(bmin, bmax)?,
        bh,
        bdt,
    );
    benes.validate().map_err(|e| ck.fail("benes", e))?;

    let e = &raw.experiment;
    let budget = DeviationBudget {
        alphas: e.alphas.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]),
        betas: e.betas.clone().unwrap_or_else(|| vec![-0.2, 0.0, 0.2]),
        best_response: e.best_response.unwrap_or(true),
        replications: e.replications.unwrap_or(16),
    };
    let experiment = Experiment {
        agents: e.agents.unwrap_or(200),
        replications: budget.replications,
        n_values: e.n_values.clone(),
        paths: e.paths.unwrap_or(2000),
        tol: e.tol.unwrap_or(1e-3),
        max_iter: e.max_iter.unwrap_or(10),
        theta: e.theta.unwrap_or(1.0),
        dt_paths: e.dt_paths.unwrap_or(200),
        r1_nodes: e.r1_nodes.unwrap_or(15),
        r2_nodes: e.r2_nodes.unwrap_or(121),
        control_nodes: e.control_nodes.unwrap_or(41),
        budget,
        gain_check: e.gain_check.unwrap_or(true),
        policy_gain: e.policy_gain.unwrap_or(1.0),
        policy_target: e.policy_target.unwrap_or(0.0),
    };
    ck.require(experiment.agents >= 1, "agents", "need at least one agent")?;
    ck.require(experiment.replications >= 1, "replications", "need at least one replication")?;
    ck.require(experiment.paths >= 2, "paths", "need at least two paths")?;
    ck.require(experiment.tol > 0.0, "tol", "tolerance must be positive")?;
    ck.require(experiment.max_iter >= 1, "max_iter", "need at least one iteration")?;
    ck.require(
        experiment.theta > 0.0 && experiment.theta <= 1.0,
        "theta",
        "damping theta must lie in (0, 1]",
    )?;
    ck.require(
        experiment.r1_nodes >= 3 && experiment.r2_nodes >= 3 && experiment.control_nodes >= 2,
        "r2_nodes",
        "HJB grid needs at least 3 nodes per axis and 2 control nodes",
    )?;
    if let Some(ns) = &experiment.n_values {
        ck.require(
            !ns.is_empty() && ns.windows(2).all(|w| w[1] > w[0]) && ns[0] >= 2,
            "n_values",
            "N values must be strictly increasing and at least 2",
        )?;
    }

    let snapshots = f.snapshots.unwrap_or(5);
    Ok(Config {
        raw,
        seed,
        scenario,
        filter,
        snapshots,
        benes,
        mode,
        experiment,
    })
}
