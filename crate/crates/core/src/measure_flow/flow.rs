use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, NoiseKind};

use super::measure::{marginal_distance, Measure};

/// Time-indexed family of probability measures on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlow {
    times: Vec<f64>,
    measures: Vec<Measure>,
    holder_exponent: Option<f64>,
}

impl MeasureFlow {
    pub fn new(times: Vec<f64>, measures: Vec<Measure>) -> Result<Self> {
        if times.is_empty() || times.len() != measures.len() {
            return Err(Error::invalid("a flow needs one measure per time point"));
        }
        if times[0].abs() > 1e-12 {
            return Err(Error::invalid("flow time grid must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("flow times must be strictly increasing"));
        }
        if measures.iter().any(|m| !m.is_normalized()) {
            return Err(Error::invalid("flow measures must be normalised"));
        }
        Ok(MeasureFlow {
            times,
            measures,
            holder_exponent: None,
        })
    }

    pub(crate) fn new_unchecked(times: Vec<f64>, measures: Vec<Measure>) -> Self {
        MeasureFlow {
            times,
            measures,
            holder_exponent: None,
        }
    }

    /// The same measure at every time of the grid.
    pub fn constant(times: Vec<f64>, m: Measure) -> Result<Self> {
        let measures = vec![m; times.len()];
        MeasureFlow::new(times, measures)
    }

    pub fn with_holder_exponent(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid("Hölder exponent must lie in (0, 1]"));
        }
        self.holder_exponent = Some(beta);
        Ok(self)
    }

    pub fn holder_exponent(&self) -> Option<f64> {
        self.holder_exponent
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Measure in force at time `t` (the last grid time not after `t`).
    pub fn at(&self, t: f64) -> &Measure {
        let k = match self
            .times
            .binary_search_by(|s| s.total_cmp(&(t + 1e-12)))
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        &self.measures[k.min(self.measures.len() - 1)]
    }

    pub fn means(&self) -> Vec<f64> {
        self.measures.iter().map(|m| m.mean()).collect()
    }

    pub fn shifted(&self, c: f64) -> MeasureFlow {
        MeasureFlow {
            times: self.times.clone(),
            measures: self.measures.iter().map(|m| m.shifted(c)).collect(),
            holder_exponent: self.holder_exponent,
        }
    }

    /// Damped update `(1 − θ) self + θ other`, time by time.
    pub fn mix(&self, other: &MeasureFlow, theta: f64) -> Result<MeasureFlow> {
        self.check_same_grid(other)?;
        if theta >= 1.0 {
            return Ok(other.clone());
        }
        Ok(MeasureFlow {
            times: self.times.clone(),
            measures: self
                .measures
                .iter()
                .zip(&other.measures)
                .map(|(a, b)| a.mix(b, theta))
                .collect(),
            holder_exponent: None,
        })
    }

    pub fn compress(&self, n: usize) -> MeasureFlow {
        MeasureFlow {
            times: self.times.clone(),
            measures: self.measures.iter().map(|m| m.compress(n)).collect(),
            holder_exponent: self.holder_exponent,
        }
    }

    pub(crate) fn check_same_grid(&self, other: &MeasureFlow) -> Result<()> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::invalid("flows live on different time grids"));
        }
        Ok(())
    }

    /// CSV with a leading time column: `(t, x, weight)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "weight"])?;
        for (t, m) in self.times.iter().zip(&self.measures) {
            let (xs, ws) = m.atoms();
            for (x, p) in xs.iter().zip(ws) {
                wr.write_record([t.to_string(), x.to_string(), p.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut times: Vec<f64> = Vec::new();
        let mut atoms: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let mut vals = [0.0; 3];
            for (i, v) in vals.iter_mut().enumerate() {
                *v = rec
                    .get(i)
                    .ok_or_else(|| Error::invalid("short flow CSV row"))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::invalid(format!("bad number in flow CSV: {e}")))?;
            }
            if times.last().is_none_or(|t| *t != vals[0]) {
                times.push(vals[0]);
                atoms.push((Vec::new(), Vec::new()));
            }
            let a = atoms.last_mut().unwrap();
            a.0.push(vals[1]);
            a.1.push(vals[2]);
        }
        let measures = atoms
            .into_iter()
            .map(|(x, w)| Measure::particles(x, w))
            .collect::<Result<Vec<_>>>()?;
        MeasureFlow::new(times, measures)
    }
}

/// `sup_t` of the per-time truncated Wasserstein distance between two flows on
/// the same grid. This lower-bounds the path-space distance.
pub fn sup_marginal_distance(a: &MeasureFlow, b: &MeasureFlow) -> Result<f64> {
    a.check_same_grid(b)?;
    let mut d: f64 = 0.0;
    for (ma, mb) in a.measures.iter().zip(&b.measures) {
        d = d.max(marginal_distance(ma, mb)?);
    }
    Ok(d)
}

/// A bounded Lipschitz test function for Hölder checks.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lipschitz: f64,
    pub bound: f64,
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        lipschitz: f64,
        bound: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            f: Arc::new(f),
            lipschitz,
            bound,
        }
    }

    /// `x` clipped to `[-b, b]`.
    pub fn clipped_identity(b: f64) -> Self {
        TestFunction::new(format!("clip(x, ±{b})"), 1.0, b, move |x| x.clamp(-b, b))
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::new(format!("const {c}"), 0.0, c.abs(), move |_| c)
    }
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub max_ratio: f64,
    pub pass: bool,
    pub pairs_checked: usize,
    /// `(test function index, t', t'')` attaining the maximum.
    pub worst: Option<(usize, f64, f64)>,
}

const DISTANT_PAIRS: usize = 256;

/// Largest `|∫ψ dμ_{t'} − ∫ψ dμ_{t''}| / |t' − t''|^β` over the test functions,
/// all adjacent time pairs and a seeded random subset of distant pairs;
/// passes when the maximum does not exceed `b`.
pub fn holder_check(
    flow: &MeasureFlow,
    beta: f64,
    b: f64,
    tests: &[TestFunction],
) -> Result<HolderReport> {
    if tests.is_empty() {
        return Err(Error::invalid("holder_check needs at least one test function"));
    }
    if !(beta > 0.0 && beta <= 1.0) || !(b > 0.0) {
        return Err(Error::invalid("need β ∈ (0, 1] and B > 0"));
    }
    for t in tests {
        if !(t.lipschitz.is_finite() && t.bound.is_finite()) {
            return Err(Error::invalid(format!(
                "test function {} lacks finite bound/Lipschitz constants",
                t.name
            )));
        }
    }
    let m = flow.len();
    let integrals: Vec<Vec<f64>> = tests
        .iter()
        .map(|tf| flow.measures.iter().map(|mu| mu.integrate(&*tf.f)).collect())
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..m.saturating_sub(1)).map(|k| (k, k + 1)).collect();
    if m > 2 {
        let mut rng = stream(0x401d, m as u64, NoiseKind::Misc);
        for _ in 0..DISTANT_PAIRS {
            let i = rng.gen_range(0..m);
            let j = rng.gen_range(0..m);
            if i.abs_diff(j) > 1 {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    let mut max_ratio = 0.0;
    let mut worst = None;
    for (fi, ints) in integrals.iter().enumerate() {
        for &(i, j) in &pairs {
            let dt = (flow.times[j] - flow.times[i]).abs().powf(beta);
            let ratio = (ints[j] - ints[i]).abs() / dt;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = Some((fi, flow.times[i], flow.times[j]));
            }
        }
    }
    Ok(HolderReport {
        max_ratio,
        pass: max_ratio <= b,
        pairs_checked: pairs.len() * tests.len(),
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_times(n: usize, t: f64) -> Vec<f64> {
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    fn gaussian_grid(mean: f64) -> Measure {
        let dx = 0.01;
        let x_lo = -12.0;
        let dens: Vec<f64> = (0..2401)
            .map(|j| {
                let x = x_lo + j as f64 * dx;
                (-0.5 * (x - mean) * (x - mean)).exp()
            })
            .collect();
        Measure::grid(x_lo, dx, dens).unwrap()
    }

    #[test]
    fn constant_flow_has_zero_ratio() {
        let f = MeasureFlow::constant(grid_times(10, 1.0), Measure::dirac(0.3)).unwrap();
        let r = holder_check(&f, 0.5, 1e-9, &[TestFunction::clipped_identity(10.0)]).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn moving_gaussians_have_unit_ratio() {
        let times = grid_times(20, 1.0);
        let ms = times.iter().map(|t| gaussian_grid(*t)).collect();
        let f = MeasureFlow::new(times, ms).unwrap();
        let tf = [TestFunction::clipped_identity(10.0)];
        let r = holder_check(&f, 1.0, 1.0 + 1e-6, &tf).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-6, "{}", r.max_ratio);
        assert!(r.pass);
        assert!(!holder_check(&f, 1.0, 0.9, &tf).unwrap().pass);
    }

    #[test]
    fn unit_test_function_sees_no_motion() {
        let times = grid_times(10, 1.0);
        let ms = times.iter().map(|t| gaussian_grid(*t)).collect();
        let f = MeasureFlow::new(times, ms).unwrap();
        let r = holder_check(&f, 1.0, 1.0, &[TestFunction::constant(1.0)]).unwrap();
        assert!(r.max_ratio < 1e-12);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let f = MeasureFlow::constant(grid_times(2, 1.0), Measure::dirac(0.0)).unwrap();
        assert!(matches!(holder_check(&f, 1.0, 1.0, &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn flow_validation() {
        assert!(MeasureFlow::new(vec![0.0, 0.0], vec![Measure::dirac(0.0); 2]).is_err());
        assert!(MeasureFlow::new(vec![0.1, 0.2], vec![Measure::dirac(0.0); 2]).is_err());
        assert!(MeasureFlow::new(vec![0.0], vec![]).is_err());
        let f = MeasureFlow::constant(vec![0.0, 1.0], Measure::dirac(0.0)).unwrap();
        assert!(f.clone().with_holder_exponent(1.5).is_err());
        assert_eq!(f.with_holder_exponent(0.5).unwrap().holder_exponent(), Some(0.5));
    }

    #[test]
    fn flow_lookup_and_csv() {
        let times = vec![0.0, 0.5, 1.0];
        let ms = vec![Measure::dirac(0.0), Measure::dirac(1.0), Measure::dirac(2.0)];
        let f = MeasureFlow::new(times, ms).unwrap();
        assert_eq!(f.at(0.49).mean(), 0.0);
        assert_eq!(f.at(0.5).mean(), 1.0);
        assert_eq!(f.at(7.0).mean(), 2.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(MeasureFlow::read_csv(&buf[..]).unwrap(), f);
        assert!((sup_marginal_distance(&f, &f.shifted(0.2)).unwrap() - 0.2).abs() < 1e-12);
    }
}
