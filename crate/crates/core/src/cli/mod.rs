//! Configuration parsing and the experiment runner behind the `pomfg` binary.
//!
//! Every subcommand writes its CSV artifacts into the output directory,
//! followed by `manifest.txt`, a flat `key=value` file with the config hash,
//! seed, tool version, wall time and the list of files written. Data files
//! depend only on the configuration and seed.

mod config;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::control::{
    evaluate_benes_policy_cost, solve_hjb_sufficient_stats, CostMode, HjbGrid, MeanFeedback, PolicyTable, ZeroPolicy,
};
use crate::dynamics::{
    affine_feedback_mean_flow, induced_flow, initial_filter, simulate_population, Drift, SimOptions,
};
use crate::error::Result;
use crate::filtering::{
    benes_grid_comparison, benes::write_stats_csv, kalman_bucy_oracle, normalize, phi_residual_check, AgentFilter,
    BenesGrid, FilterMode, LinearModel, ZakaiSolver,
};
use crate::measure_flow::{
    holder_check, marginal_distance, path_distance_dt, sup_marginal_distance, Measure, MeasureFlow, TestFunction,
};
use crate::mfg::{estimate_gain_constants, induced_flow_of_policy, nce_iterate, probe_states, shifted_flows, NceOptions};
use crate::nash::{mv_rate_study, nash_rate_study};
use crate::rng::derive_seed;

pub use config::{
    load_config, parse_config, preset, BenesSection, Config, Experiment, ExperimentSection, FilterSection,
    ModelSection, RawConfig, PRESETS,
};

#[derive(Debug, Parser)]
#[command(name = "pomfg", version, about = "Partially observed mean field game laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Named preset; keys in the config file override it.
    #[arg(long, global = true)]
    pub preset: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One filter run with density snapshots and a Kalman–Bucy column.
    FilterDemo,
    /// Two-dimensional model end to end: residual check, filter, HJB, policy.
    BenesDemo,
    /// Fixed-point iteration on the measure flow.
    SolveMfg,
    /// Population vs McKean–Vlasov gap as a function of N.
    MvRate,
    /// Unilateral deviation audit across N.
    NashAudit,
    /// Distances between two independently seeded population flows.
    Distances,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FilterDemo => "filter-demo",
            Command::BenesDemo => "benes-demo",
            Command::SolveMfg => "solve-mfg",
            Command::MvRate => "mv-rate",
            Command::NashAudit => "nash-audit",
            Command::Distances => "distances",
        }
    }
}

/// Record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time: f64,
    pub files: Vec<String>,
    /// Headline numbers, also written to `summary.csv`.
    pub summary: Vec<(String, String)>,
}

impl RunManifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "command={}", self.command)?;
        writeln!(w, "config_hash={}", self.config_hash)?;
        writeln!(w, "seed={}", self.seed)?;
        writeln!(w, "version={}", self.version)?;
        writeln!(w, "wall_time_s={:.3}", self.wall_time)?;
        writeln!(w, "files={}", self.files.join(","))?;
        Ok(())
    }
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
    summary: Vec<(String, String)>,
}

impl Out<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn note(&mut self, key: &str, value: impl Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

/// Run `command` and write its artifacts plus `manifest.txt` into `out_dir`.
pub fn run(command: Command, cfg: &Config, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let mut out = Out {
        dir: out_dir,
        files: Vec::new(),
        summary: Vec::new(),
    };
    log::info!("{} with config {}", command.name(), cfg.raw.hash());
    match command {
        Command::FilterDemo => filter_demo(cfg, &mut out)?,
        Command::BenesDemo => benes_demo(cfg, &mut out)?,
        Command::SolveMfg => solve_mfg(cfg, &mut out)?,
        Command::MvRate => mv_rate(cfg, &mut out)?,
        Command::NashAudit => nash_audit(cfg, &mut out)?,
        Command::Distances => distances(cfg, &mut out)?,
    }
    let summary = std::mem::take(&mut out.summary);
    {
        let mut w = csv::Writer::from_writer(out.create("summary.csv")?);
        w.write_record(["quantity", "value"])?;
        for (k, v) in &summary {
            w.write_record([k, v])?;
        }
        w.flush()?;
    }
    let manifest = RunManifest {
        command: command.name().to_string(),
        config_hash: cfg.raw.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time: start.elapsed().as_secs_f64(),
        files: out.files,
        summary,
    };
    let mut w = BufWriter::new(File::create(out_dir.join("manifest.txt"))?);
    manifest.write(&mut w)?;
    w.flush()?;
    Ok(manifest)
}

fn filter_demo(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let mut sc = cfg.scenario.clone();
    sc.seed = cfg.seed;
    let bundle = simulate_population(&sc, &[&ZeroPolicy], 1, &SimOptions::new(cfg.filter.clone()))?;
    let (zs, ys) = (&bundle.states[0], &bundle.observations[0]);
    let dy: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let solver = match &cfg.filter {
        FilterMode::Grid(spec) => Some(Arc::new(ZakaiSolver::new(*spec, sc.sigma, sc.dt, |x| {
            sc.observation.eval(x)
        })?)),
        _ => None,
    };
    let mut filter = initial_filter(&sc, &cfg.filter, solver.as_ref(), 0)?;

    let oracle = match (&sc.drift, sc.observation.linear_parts()) {
        (Drift::Affine { a, b, c }, Some((ch, dh))) if *b == 0.0 => {
            let model = LinearModel {
                a: *a,
                b: *c,
                c: ch,
                sigma: sc.sigma,
                r: 1.0,
            };
            let shifted: Vec<f64> = dy.iter().map(|d| d - dh * sc.dt).collect();
            Some(kalman_bucy_oracle(&model, &shifted, sc.dt, sc.init.mean_of(0), sc.init.variance)?)
        }
        _ => None,
    };

    let steps = dy.len();
    let snaps: Vec<usize> = match (cfg.snapshots, &cfg.filter) {
        (0, _) | (_, FilterMode::Kalman) | (_, FilterMode::Particle { .. }) => Vec::new(),
        (1, _) => vec![steps],
        (s, _) => (0..s).map(|i| (i * steps + (s - 1) / 2) / (s - 1)).collect(),
    };
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snap_id = 0;
    for k in 0..=steps {
        let t = bundle.times[k];
        let st = filter.state();
        rows.push((t, zs[k], ys[k], st.mean(), st.variance()));
        if snaps.contains(&k) {
            if let AgentFilter::Grid { density, .. } = &filter {
                let mut d = normalize(density)?;
                d.t = t;
                d.write_csv(out.create(&format!("density_{snap_id}.csv"))?)?;
                snap_id += 1;
            }
        }
        if k == steps {
            break;
        }
        let here = Measure::dirac(zs[k]);
        let field = sc.drift.frozen(t, &here);
        let grid_drift: Option<Vec<f64>> = solver
            .as_ref()
            .map(|s| s.interfaces().into_iter().map(|x| field.eval(x)).collect());
        filter.step(&sc, &field, grid_drift.as_deref(), 0.0, dy[k])?;
    }

    let mut w = csv::Writer::from_writer(out.create("filter.csv")?);
    w.write_record(["t", "z", "y", "mean", "var", "kb_mean", "kb_var"])?;
    for (k, (t, z, y, m, v)) in rows.iter().enumerate() {
        let (km, kv) = match &oracle {
            Some(o) => (o.means[k].to_string(), o.variances[k].to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record(&[t.to_string(), z.to_string(), y.to_string(), m.to_string(), v.to_string(), km, kv])?;
    }
    w.flush()?;
    let last = rows.last().expect("at least one row");
    out.note("final_mean", last.3);
    out.note("final_var", last.4);
    if let Some(o) = &oracle {
        let (km, kv) = (o.means[steps], o.variances[steps]);
        out.note("kalman_final_mean", km);
        out.note("kalman_final_var", kv);
        let rms = |f: &dyn Fn(usize) -> (f64, f64)| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..=steps {
                let (a, b) = f(k);
                num += (a - b) * (a - b);
                den += b * b;
            }
            (num / den.max(f64::MIN_POSITIVE)).sqrt()
        };
        out.note("mean_rel_rms", rms(&|k| (rows[k].3, o.means[k])));
        out.note("var_rel_rms", rms(&|k| (rows[k].4, o.variances[k])));
    }
    Ok(())
}

fn hjb_grid(cfg: &Config) -> Result<HjbGrid> {
    let e = &cfg.experiment;
    HjbGrid::covering(&cfg.benes, cfg.mode, e.r1_nodes, e.r2_nodes, e.control_nodes)
}

fn benes_demo(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let model = &cfg.benes;
    let e = &cfg.experiment;
    let xs: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
    let res = phi_residual_check(model, &xs, &model.times(), 1e-6);
    out.note("phi_residual", res.max_residual);
    out.note("phi_residual_pass", res.pass);

    let (a, b) = BenesGrid::covering(model, 5.5, 111);
    let cmp = benes_grid_comparison(model, a, b, 0.0, cfg.seed, cfg.mode)?;
    write_stats_csv(&cmp.stats, out.create("stats.csv")?)?;
    {
        let mut w = csv::Writer::from_writer(out.create("grid_l1.csv")?);
        w.write_record(["t", "l1", "grid_mean1", "grid_mean2"])?;
        for ((t, l), m) in cmp.times.iter().zip(&cmp.l1).zip(&cmp.grid_mean) {
            w.write_record(&[t.to_string(), l.to_string(), m[0].to_string(), m[1].to_string()])?;
        }
        w.flush()?;
    }
    out.note("grid_l1_at_horizon", cmp.l1_at_horizon());

    let flow = induced_flow_of_policy(&ZeroPolicy, model, e.paths, cfg.seed, cfg.mode)?;
    let grid = hjb_grid(cfg)?;
    let (value, policy) = solve_hjb_sufficient_stats(model, &flow, &grid, cfg.mode)?;
    value.write_csv(out.create("value.csv")?)?;
    policy.write_csv(out.create("policy.csv")?)?;
    let v0 = value.value(0, [model.xi[0], model.xi[1]]);
    let mc = evaluate_benes_policy_cost(
        model,
        &policy,
        Some(&flow),
        e.paths,
        CostMode::Mv,
        derive_seed(cfg.seed, &[1]),
        cfg.mode,
    )?;
    out.note("hjb_value", v0);
    out.note("mc_cost", mc.mean);
    out.note("mc_std_error", mc.std_error);
    out.note("relative_gap", (v0 - mc.mean).abs() / mc.mean.abs().max(f64::MIN_POSITIVE));
    out.note("policy_lipschitz", policy.lipschitz());
    Ok(())
}

/// NCE loop from the flow of the zero policy, optionally followed by the
/// gain-constant estimate around the final flow.
fn run_nce(cfg: &Config, grid: &HjbGrid) -> Result<crate::mfg::FixedPointReport> {
    let model = &cfg.benes;
    let e = &cfg.experiment;
    let init = induced_flow_of_policy(&ZeroPolicy, model, e.paths, cfg.seed, cfg.mode)?;
    let opts = NceOptions {
        tol: e.tol,
        max_iter: e.max_iter,
        paths: e.paths,
        seed: cfg.seed,
        theta: e.theta,
        mode: cfg.mode,
        dt_paths: e.dt_paths,
    };
    nce_iterate(&init, model, grid, &opts)
}

fn solve_mfg(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let model = &cfg.benes;
    let e = &cfg.experiment;
    let grid = hjb_grid(cfg)?;
    let mut report = run_nce(cfg, &grid)?;
    if e.gain_check {
        let base = report.final_flow().clone();
        let probes = probe_states(model, &report.policy, 64, 10, derive_seed(cfg.seed, &[2]), cfg.mode)?;
        let perturbed = shifted_flows(&base, &[0.25, -0.25, 0.5]);
        report.gain_estimate = Some(estimate_gain_constants(
            model, &grid, &base, &perturbed, &probes, e.paths, cfg.seed, cfg.mode,
        )?);
    }
    report.write_csv(out.create("nce.csv")?)?;
    report.final_flow().write_csv(out.create("flow.csv")?)?;
    report.policy.write_csv(out.create("policy.csv")?)?;
    out.note("iterations", report.iterations);
    out.note("converged", report.converged);
    out.note("final_distance", report.distances.last().copied().unwrap_or(f64::NAN));
    out.note("monotone", report.monotone());
    out.note("non_contractive", report.non_contractive);
    out.note("path_distance_dt", report.final_path_distance);
    if let Some(g) = &report.gain_estimate {
        out.note("c1_hat", g.c1);
        out.note("c2_hat", g.c2);
        out.note("gain_product", g.product);
    }
    Ok(())
}

fn feedback(cfg: &Config) -> MeanFeedback {
    MeanFeedback {
        gain: cfg.experiment.policy_gain,
        target: cfg.experiment.policy_target,
    }
}

fn mv_rate(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let e = &cfg.experiment;
    let policy = feedback(cfg);
    let flow = affine_feedback_mean_flow(&cfg.scenario, policy.gain, policy.target)?;
    let ns = e.n_values.clone().unwrap_or_else(|| vec![8, 16, 32, 64, 128, 256, 512]);
    let report = mv_rate_study(
        &cfg.scenario,
        &policy,
        &flow,
        &ns,
        e.replications,
        cfg.seed,
        &SimOptions::new(cfg.filter.clone()),
    )?;
    report.write_csv(out.create("rate.csv")?)?;
    out.note("slope", report.slope);
    out.note("intercept", report.intercept);
    out.note("spearman", report.spearman);
    out.note("replications", report.replications);
    Ok(())
}

fn nash_audit(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let e = &cfg.experiment;
    let grid = hjb_grid(cfg)?;
    let nce = run_nce(cfg, &grid)?;
    let policy: &PolicyTable = &nce.policy;
    let ns = e.n_values.clone().unwrap_or_else(|| vec![32, 64, 128, 256, 512]);
    let report = nash_rate_study(
        &cfg.benes,
        &grid,
        policy,
        nce.final_flow(),
        &ns,
        &e.budget,
        derive_seed(cfg.seed, &[3]),
        cfg.mode,
    )?;
    report.write_csv(out.create("nash.csv")?)?;
    {
        let mut w = csv::Writer::from_writer(out.create("deviations.csv")?);
        w.write_record(["N", "deviation", "cost", "stderr"])?;
        for r in &report.reports {
            w.write_record(&[r.n.to_string(), "baseline".into(), r.baseline_cost.to_string(), r.baseline_se.to_string()])?;
            for d in &r.deviations {
                w.write_record(&[r.n.to_string(), d.name.clone(), d.cost.to_string(), d.std_error.to_string()])?;
            }
        }
        w.flush()?;
    }
    out.note("nce_iterations", nce.iterations);
    out.note("any_profitable", report.any_profitable);
    out.note(
        "slope",
        report.slope.map(|s| s.to_string()).unwrap_or_else(|| "undefined".into()),
    );
    out.note("constant_c", report.constant);
    out.note("pass", report.pass);
    out.note("message", &report.message);
    Ok(())
}

fn distances(cfg: &Config, out: &mut Out<'_>) -> Result<()> {
    let e = &cfg.experiment;
    let policy = feedback(cfg);
    let opts = SimOptions::new(cfg.filter.clone()).without_noise();
    let mut sc = cfg.scenario.clone();
    sc.seed = cfg.seed;
    let a = simulate_population(&sc, &[&policy], e.agents, &opts)?;
    sc.seed = derive_seed(cfg.seed, &[1]);
    let b = simulate_population(&sc, &[&policy], e.agents, &opts)?;
    let (fa, fb): (MeasureFlow, MeasureFlow) = (induced_flow(&a)?, induced_flow(&b)?);
    {
        let mut w = csv::Writer::from_writer(out.create("distances.csv")?);
        w.write_record(["t", "distance"])?;
        for ((t, ma), mb) in fa.times().iter().zip(fa.measures()).zip(fb.measures()) {
            w.write_record(&[t.to_string(), marginal_distance(ma, mb)?.to_string()])?;
        }
        w.flush()?;
    }
    fa.write_csv(out.create("flow.csv")?)?;
    out.note("sup_marginal_distance", sup_marginal_distance(&fa, &fb)?);
    let keep = e.dt_paths.min(e.agents);
    out.note(
        "path_distance_dt",
        path_distance_dt(&a.to_paths()?.truncated(keep), &b.to_paths()?.truncated(keep))?,
    );
    let h = holder_check(&fa, 0.5, 10.0, &[TestFunction::clipped_identity(10.0)])?;
    out.note("holder_ratio", h.max_ratio);
    Ok(())
}

/// Entry point of the binary: parse flags, configure logging and threads,
/// run, and map errors to exit codes.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return 2;
        }
    }
    let result = load_config(cli.config.as_deref(), cli.preset.as_deref(), cli.seed)
        .and_then(|cfg| run(cli.command, &cfg, &cli.out));
    match result {
        Ok(m) => {
            for (k, v) in &m.summary {
                println!("{k} = {v}");
            }
            println!("wrote {} files to {}", m.files.len() + 1, cli.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
