//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Slow; run with `cargo test --release --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use nalgebra::Matrix2;

use pomfg::cli::{parse_config, run, Command, Config};
use pomfg::control::{
    evaluate_benes_policy_cost, solve_hjb_sufficient_stats, CostMode, HjbGrid, MeanFeedback, ZeroPolicy,
};
use pomfg::dynamics::{affine_feedback_mean_flow, simulate_population, SimOptions};
use pomfg::filtering::{
    benes_drift, benes_grid_comparison, kalman_bucy_oracle, phi_residual_check, riccati_step, BenesGrid, BenesMode,
    CoefficientPath, DensityGrid, FilterMode, GridSpec, LinearModel, ParticleCloud, QuadraticL2, ZakaiSolver,
};
use pomfg::measure_flow::{empirical_measure, marginal_distance, path_distance_dt, Measure, MeasureFlow, PathEnsemble};
use pomfg::mfg::{
    estimate_gain_constants, induced_flow_of_policy, nce_iterate, probe_states, shifted_flows, FixedPointReport,
    NceOptions,
};
use pomfg::nash::{mv_rate_study, nash_rate_study, positive_part};
use pomfg::rng::{derive_seed, normal, stream, NoiseKind};
use pomfg::stats;
use rand::Rng;

type Outcome = pomfg::Result<(bool, String)>;

struct Runner {
    failures: usize,
}

impl Runner {
    fn check(&mut self, id: u32, name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        let (mut ok, mut detail) = match res {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = budget_s {
            if secs > b {
                ok = false;
                detail.push_str(&format!("; runtime {secs:.0} s over the {b:.0} s budget"));
            }
        }
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {id} {name}: {detail} ({secs:.1} s)", if ok { "PASS" } else { "FAIL" });
    }
}

fn cfg(preset: &str, extra: &str) -> Config {
    parse_config(extra, Some(preset), None).expect("preset parses")
}

fn filter_oracle() -> Outcome {
    let c = cfg("linear-gaussian", "");
    let dir = scratch("c1");
    let m = run(Command::FilterDemo, &c, &dir)?;
    let num = |k: &str| m.get(k).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
    let (grid_mean, grid_var) = (num("mean_rel_rms"), num("var_rel_rms"));
    let grid_ok = grid_mean <= 0.02 && grid_var <= 0.02;

    // Particle filter over 50 independent observation records.
    let sc = &c.scenario;
    let (mut em, mut ev) = (Vec::new(), Vec::new());
    for seed in 0..50u64 {
        let mut s = sc.clone();
        s.seed = derive_seed(1000, &[seed]);
        let b = simulate_population(&s, &[&ZeroPolicy], 1, &SimOptions::new(FilterMode::Kalman))?;
        let dy: Vec<f64> = b.observations[0].windows(2).map(|w| w[1] - w[0]).collect();
        let kb = kalman_bucy_oracle(&LinearModel::new(-0.5, 1.0, 1.0, 1.0), &dy, s.dt, 1.0, 0.5)?;
        let mut rng = stream(s.seed, 0, NoiseKind::Filter);
        let mut cloud = ParticleCloud::gaussian(5000, 1.0, 0.5, &mut rng)?;
        for d in &dy {
            cloud.step(&mut rng, 0.0, *d, s.dt, s.sigma, |x| -0.5 * x, |x| x)?;
        }
        em.push(cloud.mean() - kb.means[dy.len()]);
        ev.push(cloud.variance() - kb.variances[dy.len()]);
    }
    let z = |e: &[f64]| stats::mean(e).abs() / stats::std_error(e);
    let (zm, zv) = (z(&em), z(&ev));
    Ok((
        grid_ok && zm <= 3.0 && zv <= 3.0,
        format!(
            "grid rel RMS mean {grid_mean:.2e} var {grid_var:.2e}; particle bias {:.1} SE (mean), {:.1} SE (var)",
            zm, zv
        ),
    ))
}

fn benes_consistency() -> Outcome {
    let c = cfg("benes-quadratic", "seed = 1");
    let model = &c.benes;
    let mut rng = stream(5, 0, NoiseKind::Misc);
    let mut drift_err = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen::<f64>() * model.horizon;
        let x = -5.0 + 10.0 * rng.gen::<f64>();
        let h = 1e-5;
        let fd = ((model.gamma(t, x + h)).ln() - (model.gamma(t, x - h)).ln()) / (2.0 * h);
        drift_err = drift_err.max((benes_drift(model, t, x)? - model.g11 * model.g11 * fd).abs());
    }
    let xs: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
    let phi = phi_residual_check(model, &xs, &model.times(), 1e-6);

    let gg = model.g() * model.g().transpose();
    let w = model.riccati_weight(0.0, BenesMode::Literal)?;
    assert_eq!(w, Matrix2::zeros(), "Q is zero on this preset");
    let mut p = model.p0;
    let mut ric_err = 0.0f64;
    for k in 1..=1000 {
        p = riccati_step(&p, &w, &gg, 1e-3)?;
        let want = model.p0 + k as f64 * 1e-3 * gg;
        ric_err = ric_err.max((p - want).abs().max());
    }

    let (a, b) = BenesGrid::covering(model, 5.5, 111);
    let mut l1 = 0.0f64;
    for seed in 0..3 {
        l1 = l1.max(benes_grid_comparison(model, a, b, 0.0, seed, c.mode)?.l1_at_horizon());
    }
    Ok((
        drift_err < 1e-6 && phi.max_residual < 1e-6 && ric_err < 1e-10 && l1 < 5e-2,
        format!(
            "drift err {drift_err:.1e}, potential residual {:.1e}, Riccati err {ric_err:.1e}, max L1 at T over 3 paths {l1:.4}",
            phi.max_residual
        ),
    ))
}

fn mass_laws() -> Outcome {
    let spec = GridSpec::new(-6.0, 6.0, 241);
    let zakai = ZakaiSolver::new(spec, 1.0, 1e-3, |_| 0.0)?;
    let drift: Vec<f64> = zakai.interfaces().into_iter().map(|x| -x).collect();
    let mut d = DensityGrid::gaussian(spec, 0.5, 0.3)?;
    let mut worst_zakai = 0.0f64;
    for _ in 0..10_000 {
        let next = zakai.zakai_step(&d, &drift, 0.2, 0.0)?;
        worst_zakai = worst_zakai.max((next.mass() - d.mass()).abs());
        d = next;
    }
    let kushner = ZakaiSolver::new(spec, 1.0, 1e-3, |x| x)?;
    let mut rng = stream(3, 0, NoiseKind::Misc);
    let mut k = DensityGrid::gaussian(spec, 0.5, 0.3)?;
    let mut worst_kushner = 0.0f64;
    for _ in 0..10_000 {
        let dy = k.mean() * 1e-3 + 1e-3f64.sqrt() * normal(&mut rng);
        k = kushner.kushner_step(&k, &drift, 0.0, dy)?;
        worst_kushner = worst_kushner.max((k.mass() - 1.0).abs());
    }
    Ok((
        worst_zakai <= 1e-10 && worst_kushner <= 1e-12,
        format!("Zakai mass change per step {worst_zakai:.1e}, Kushner mass error {worst_kushner:.1e}"),
    ))
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

fn metric_axioms() -> Outcome {
    let mut rng = stream(4, 0, NoiseKind::Misc);
    let mut axiom_err = 0.0f64;
    let mut oracle_err = 0.0f64;
    let random_measure = |rng: &mut rand_chacha::ChaCha8Rng| -> Measure {
        let n = rng.gen_range(1..20);
        let xs: Vec<f64> = (0..n).map(|_| 2.0 * normal(rng)).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
        let s: f64 = ws.iter().sum();
        Measure::particles(xs, ws.iter().map(|w| w / s).collect()).unwrap()
    };
    let random_paths = |rng: &mut rand_chacha::ChaCha8Rng, m: usize| -> Vec<Vec<f64>> {
        (0..m).map(|_| (0..6).map(|_| normal(rng)).collect()).collect()
    };
    let ensemble = |paths: &[Vec<f64>]| {
        PathEnsemble::new((0..6).map(|k| k as f64 * 0.2).collect(), paths.to_vec(), 0).unwrap()
    };
    for _ in 0..100 {
        let (a, b, c) = (random_measure(&mut rng), random_measure(&mut rng), random_measure(&mut rng));
        let d = |x: &Measure, y: &Measure| marginal_distance(x, y);
        axiom_err = axiom_err
            .max(d(&a, &a)?)
            .max((d(&a, &b)? - d(&b, &a)?).abs())
            .max(d(&a, &b)? - d(&a, &c)? - d(&c, &b)?);

        let m = rng.gen_range(1..=6);
        let (pa, qa) = (random_paths(&mut rng, m), random_paths(&mut rng, m));
        let (p, q, r) = (ensemble(&pa), ensemble(&qa), ensemble(&random_paths(&mut rng, m)));
        let dp = |x: &PathEnsemble, y: &PathEnsemble| path_distance_dt(x, y);
        axiom_err = axiom_err
            .max(dp(&p, &p)?)
            .max((dp(&p, &q)? - dp(&q, &p)?).abs())
            .max(dp(&p, &q)? - dp(&p, &r)? - dp(&r, &q)?);

        let cost: Vec<Vec<f64>> = pa
            .iter()
            .map(|x| qa.iter().map(|y| x.iter().zip(y).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max).min(1.0)).collect())
            .collect();
        oracle_err = oracle_err.max((dp(&p, &q)? - brute_force(&cost) / m as f64).abs());

        let xs: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
        let ys: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
        let cost: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| (x - y).abs().min(1.0)).collect()).collect();
        let got = marginal_distance(&empirical_measure(&xs)?, &empirical_measure(&ys)?)?;
        oracle_err = oracle_err.max((got - brute_force(&cost) / m as f64).abs());
    }
    Ok((
        axiom_err <= 1e-9 && oracle_err <= 1e-12,
        format!("worst axiom violation {axiom_err:.1e}, worst gap to the permutation oracle {oracle_err:.1e}"),
    ))
}

fn mv_rate() -> Outcome {
    let c = cfg("mean-reversion-coupled", "seed = 1");
    let policy = MeanFeedback { gain: 1.0, target: 0.0 };
    let flow = affine_feedback_mean_flow(&c.scenario, policy.gain, policy.target)?;
    let ns = [8, 16, 32, 64, 128, 256, 512];
    let r = mv_rate_study(&c.scenario, &policy, &flow, &ns, 64, c.seed, &SimOptions::new(c.filter.clone()))?;
    Ok((
        (-0.65..=-0.35).contains(&r.slope),
        format!("slope {:.3} over N = 8..512 with {} replications (Spearman {:.2})", r.slope, r.replications, r.spearman),
    ))
}

fn hjb_grid(c: &Config) -> HjbGrid {
    let e = &c.experiment;
    HjbGrid::covering(&c.benes, c.mode, e.r1_nodes, e.r2_nodes, e.control_nodes).unwrap()
}

fn nce(c: &Config) -> pomfg::Result<FixedPointReport> {
    let e = &c.experiment;
    let opts = NceOptions {
        tol: 1e-3,
        max_iter: 10,
        paths: e.paths,
        seed: c.seed,
        theta: 1.0,
        mode: c.mode,
        dt_paths: e.dt_paths,
    };
    let start = induced_flow_of_policy(&ZeroPolicy, &c.benes, e.paths, c.seed, c.mode)?;
    nce_iterate(&start, &c.benes, &hjb_grid(c), &opts)
}

fn fixed_point(weak: &Config, free: &Config, out: &mut Vec<FixedPointReport>) -> Outcome {
    let w = nce(weak)?;
    let probes = probe_states(&weak.benes, &w.policy, 64, 10, derive_seed(weak.seed, &[2]), weak.mode)?;
    let shifted = shifted_flows(w.final_flow(), &[0.25, -0.25, 0.5]);
    let g = estimate_gain_constants(
        &weak.benes,
        &hjb_grid(weak),
        w.final_flow(),
        &shifted,
        &probes,
        weak.experiment.paths,
        weak.seed,
        weak.mode,
    )?;
    let f = nce(free)?;
    let ok = w.converged && w.iterations <= 10 && w.monotone() && g.product < 1.0 && f.iterations == 1 && f.distances == [0.0];
    let detail = format!(
        "weak: {} iterations, distances {:?}, c1 c2 = {:.3} x {:.3} = {:.3}; coupling-free: {} iteration(s), distance {:?}",
        w.iterations,
        w.distances.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>(),
        g.c1,
        g.c2,
        g.product,
        f.iterations,
        f.distances
    );
    out.push(w);
    out.push(f);
    Ok((ok, detail))
}

fn nash(weak: &Config, free: &Config, reports: &[FixedPointReport]) -> Outcome {
    let ns = [32, 64, 128, 256, 512];
    let study = |c: &Config, r: &FixedPointReport| {
        nash_rate_study(
            &c.benes,
            &hjb_grid(c),
            &r.policy,
            r.final_flow(),
            &ns,
            &c.experiment.budget,
            derive_seed(c.seed, &[3]),
            c.mode,
        )
    };
    let w = study(weak, &reports[0])?;
    let f = study(free, &reports[1])?;
    let first = positive_part(&w.reports[0]);
    let last = positive_part(w.reports.last().unwrap());
    let envelope = w
        .reports
        .iter()
        .all(|r| positive_part(r) <= r.epsilon_n + w.constant / (r.n as f64).sqrt() + 1e-15);
    let ok = last < first && envelope && !f.any_profitable;
    Ok((
        ok,
        format!(
            "weak: gap+ {first:.2e} at N=32 -> {last:.2e} at N=512, fitted C {:.2e}, slope {}; coupling-free profitable: {}",
            w.constant,
            w.slope.map(|s| format!("{s:.2}")).unwrap_or_else(|| "undefined".into()),
            f.any_profitable
        ),
    ))
}

fn riccati_rk4(horizon: f64, steps: usize) -> f64 {
    // s' = 2 s² − 1 backwards from s(T) = 0.
    let f = |s: f64| 2.0 * s * s - 1.0;
    let h = -horizon / steps as f64;
    let mut s = 0.0;
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(s + 0.5 * h * k1);
        let k3 = f(s + 0.5 * h * k2);
        let k4 = f(s + h * k3);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    s
}

fn hjb_cross_check(weak: &Config, reports: &[FixedPointReport]) -> Outcome {
    let model = &weak.benes;
    let flow = reports[0].final_flow();
    let e = &weak.experiment;
    let grid = HjbGrid::covering(model, weak.mode, e.r1_nodes, 241, e.control_nodes)?;
    let (value, policy) = solve_hjb_sufficient_stats(model, flow, &grid, weak.mode)?;
    let v0 = value.value(0, [model.xi[0], model.xi[1]]);
    let mc = evaluate_benes_policy_cost(model, &policy, Some(flow), 20_000, CostMode::Mv, 77, weak.mode)?;
    let gap = (v0 - mc.mean).abs() / mc.mean;

    // Flat potential, literal mode, cost z₂² + ½u²: a deterministic LQ
    // problem in r₂ plus the integrated variance P₂₂(t) = P0₂₂ + t G₂₂².
    let mut lq = model.clone();
    lq.big_delta = CoefficientPath::constant(0.0);
    lq.varsigma = CoefficientPath::constant(0.0);
    lq.eta = CoefficientPath::constant(1.0);
    lq.cost = QuadraticL2 {
        q1: 0.0,
        c1: 0.0,
        q2: 1.0,
        c2: 0.0,
        gamma: 0.0,
        lam: 1.0,
    };
    let lq_grid = HjbGrid::covering(&lq, BenesMode::Literal, 9, 241, 41)?;
    let dirac = MeasureFlow::constant(lq.times(), Measure::dirac(0.0))?;
    let (lv, _) = solve_hjb_sufficient_stats(&lq, &dirac, &lq_grid, BenesMode::Literal)?;
    let r0 = lq.xi[1];
    let (p0, g2, t) = (lq.p0[(1, 1)], lq.g22 * lq.g22, lq.horizon);
    let exact = riccati_rk4(t, 10_000) * r0 * r0 + p0 * t + 0.5 * g2 * t * t;
    let lq_value = lv.value(0, [lq.xi[0], r0]);
    let lq_gap = (lq_value - exact).abs() / exact;
    Ok((
        gap <= 0.05 && lq_gap <= 0.02,
        format!(
            "V(0, xi) {v0:.4} vs simulated {:.4} +- {:.4} (gap {:.1}%); LQ {lq_value:.4} vs {exact:.4} (gap {:.1}%)",
            mc.mean,
            mc.std_error,
            100.0 * gap,
            100.0 * lq_gap
        ),
    ))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pomfg-acceptance-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let runs = [
        ("filter-demo", "seed = 9\n[model]\nhorizon = 0.5\ndrift_a = -0.5\n[filter]\nsnapshots = 3\n"),
        ("mv-rate", "preset = \"mean-reversion-coupled\"\n[experiment]\nn_values = [8, 16, 32]\nreplications = 4\n"),
        ("distances", "[experiment]\nagents = 100\ndt_paths = 50\n"),
        ("benes-demo", "[experiment]\npaths = 300\nr1_nodes = 7\nr2_nodes = 41\ncontrol_nodes = 15\n"),
    ];
    let base = scratch("c9");
    let mut compared = 0;
    for (cmd, src) in runs {
        let config = base.join(format!("{cmd}.toml"));
        std::fs::write(&config, src)?;
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = base.join(format!("{cmd}-{rep}"));
            let status = Process::new(env!("CARGO_BIN_EXE_pomfg"))
                .arg(cmd)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .output()?;
            if !status.status.success() {
                return Ok((false, format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr))));
            }
            outputs.push(data_files(&out));
        }
        if outputs[0] != outputs[1] {
            return Ok((false, format!("{cmd} produced different data files")));
        }
        compared += outputs[0].len();
    }
    Ok((true, format!("{compared} data files identical across repeated runs of 4 commands")))
}

fn main() {
    let mut r = Runner { failures: 0 };
    r.check(1, "filter oracle equivalence", Some(120.0), filter_oracle);
    r.check(2, "finite-dimensional filter consistency", None, benes_consistency);
    r.check(3, "mass and normalisation laws", None, mass_laws);
    r.check(4, "metric axioms", None, metric_axioms);
    r.check(5, "McKean-Vlasov rate", Some(600.0), mv_rate);

    let weak = cfg("benes-quadratic", "seed = 1");
    let free = cfg("benes-coupling-free", "seed = 1");
    let mut reports = Vec::new();
    r.check(6, "fixed point", None, || fixed_point(&weak, &free, &mut reports));
    if reports.len() == 2 {
        r.check(7, "epsilon-Nash audit", Some(900.0), || nash(&weak, &free, &reports));
        r.check(8, "HJB cross-check", None, || hjb_cross_check(&weak, &reports));
    } else {
        r.check(7, "epsilon-Nash audit", None, || Ok((false, "needs the fixed points of criterion 6".into())));
        r.check(8, "HJB cross-check", None, || Ok((false, "needs the fixed points of criterion 6".into())));
    }
    r.check(9, "determinism", None, determinism);
    println!("{} of 9 criteria passed", 9 - r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
