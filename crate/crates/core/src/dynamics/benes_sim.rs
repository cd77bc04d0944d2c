use std::io::Write;

use nalgebra::Vector2;
use rand::Rng;
use rayon::prelude::*;

use crate::control::StatsPolicy;
use crate::error::{Error, Result};
use crate::filtering::benes::{advance_r, benes_drift, sample_initial};
use crate::filtering::{BenesMode, BenesModel, SufficientStats};
use crate::measure_flow::{Measure, MeasureFlow, PathEnsemble};
use crate::rng::{normal, stream, NoiseKind};

/// Paths of the two-dimensional model: states, filter means `r` and controls
/// on the model grid. `P_t` is shared by all paths and kept once.
#[derive(Clone, Debug)]
pub struct BenesBundle {
    pub times: Vec<f64>,
    pub x1: Vec<Vec<f64>>,
    pub x2: Vec<Vec<f64>>,
    pub r1: Vec<Vec<f64>>,
    pub r2: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub seed: u64,
}

impl BenesBundle {
    pub fn len(&self) -> usize {
        self.x2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x2.is_empty()
    }

    /// Per-time empirical law of `z₂` over the selected paths.
    pub fn flow_of(&self, paths: impl Iterator<Item = usize> + Clone) -> MeasureFlow {
        let measures = (0..self.times.len())
            .map(|k| Measure::uniform_unchecked(paths.clone().map(|i| self.x2[i][k]).collect()))
            .collect();
        MeasureFlow::new_unchecked(self.times.clone(), measures)
    }

    /// Per-time empirical law of `z₂` (the mean field).
    pub fn induced_flow(&self) -> MeasureFlow {
        self.flow_of(0..self.len())
    }

    pub fn z2_paths(&self) -> Result<PathEnsemble> {
        PathEnsemble::new(self.times.clone(), self.x2.clone(), self.seed)
    }

    /// Columns `path_id,t,z1,z2,r1,r2,u`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["path_id", "t", "z1", "z2", "r1", "r2", "u"])?;
        for i in 0..self.len() {
            for (k, t) in self.times.iter().enumerate() {
                wr.write_record(&[
                    i.to_string(),
                    t.to_string(),
                    self.x1[i][k].to_string(),
                    self.x2[i][k].to_string(),
                    self.r1[i][k].to_string(),
                    self.r2[i][k].to_string(),
                    self.controls[i][k].to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

struct Path {
    x1: Vec<f64>,
    x2: Vec<f64>,
    r1: Vec<f64>,
    r2: Vec<f64>,
    u: Vec<f64>,
}

/// Simulate `n` agents of the two-dimensional model; agent `i` runs the
/// finite-dimensional filter in `mode` and uses `policies[i mod len]`.
/// Agents do not interact through the dynamics, so this serves both the
/// population and the limit system; agent `i` always draws from the streams
/// of index `i`.
pub fn simulate_benes(
    model: &BenesModel,
    policies: &[&dyn StatsPolicy],
    n: usize,
    seed: u64,
    mode: BenesMode,
) -> Result<BenesBundle> {
    model.validate()?;
    if n == 0 || policies.is_empty() {
        return Err(Error::invalid("need at least one path and one policy"));
    }
    let times = model.times();
    let steps = times.len() - 1;
    let ps = model.covariance_path(mode)?;
    let gains = match mode {
        BenesMode::Literal => None,
        BenesMode::Innovation => Some(ps.iter().map(|p| model.gain(p)).collect::<Result<Vec<_>>>()?),
    };
    let n_half = model
        .nmat
        .cholesky()
        .ok_or_else(|| Error::config("N must be positive definite"))?
        .l();
    let dt = model.dt;
    let sq = dt.sqrt();

    let paths: Vec<Result<Path>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idx = i as u64;
            let mut init = stream(seed, idx, NoiseKind::Initial);
            let u1: f64 = init.gen();
            let x0 = sample_initial(model, u1, normal(&mut init));
            let (mut w1, mut w2) = (
                stream(seed, idx, NoiseKind::State),
                stream(seed, idx, NoiseKind::StateAux),
            );
            let (mut b1, mut b2) = (
                stream(seed, idx, NoiseKind::Observation),
                stream(seed, idx, NoiseKind::ObservationAux),
            );
            let policy = policies[i % policies.len()];
            let mut x = x0;
            let mut s = SufficientStats::initial(model);
            let mut path = Path {
                x1: Vec::with_capacity(steps + 1),
                x2: Vec::with_capacity(steps + 1),
                r1: Vec::with_capacity(steps + 1),
                r2: Vec::with_capacity(steps + 1),
                u: Vec::with_capacity(steps + 1),
            };
            for (k, &t) in times.iter().enumerate() {
                s.t = t;
                s.p = ps[k];
                let u = model.controls.clip(policy.control(t, &s));
                path.x1.push(x[0]);
                path.x2.push(x[1]);
                path.r1.push(s.r[0]);
                path.r2.push(s.r[1]);
                path.u.push(u);
                if k == steps {
                    break;
                }
                let db = Vector2::new(normal(&mut b1), normal(&mut b2)) * sq;
                let dy = model.h * x * dt + n_half * db;
                let g = benes_drift(model, t, x[0])?;
                x += Vector2::new(g * dt + model.g11 * sq * normal(&mut w1), u * dt + model.g22 * sq * normal(&mut w2));
                s.r = advance_r(model, &s.r, &ps[k], gains.as_ref().map(|g| &g[k]), t, u, &dy, dt);
                if !(x.iter().all(|v| v.is_finite()) && s.r.iter().all(|v| v.is_finite())) {
                    return Err(Error::blowup(t + dt, format!("path {i} diverged")));
                }
            }
            Ok(path)
        })
        .collect();
    let mut b = BenesBundle {
        times,
        x1: Vec::with_capacity(n),
        x2: Vec::with_capacity(n),
        r1: Vec::with_capacity(n),
        r2: Vec::with_capacity(n),
        controls: Vec::with_capacity(n),
        seed,
    };
    for p in paths {
        let p = p?;
        b.x1.push(p.x1);
        b.x2.push(p.x2);
        b.r1.push(p.r1);
        b.r2.push(p.r2);
        b.controls.push(p.u);
    }
    Ok(b)
}
