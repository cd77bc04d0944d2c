use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::assignment::solve_assignment;

const MASS_TOL: f64 = 1e-12;

/// Equal-size uniform particle measures up to this size are compared with an
/// exact assignment of the truncated cost.
pub const EXACT_ASSIGNMENT_THRESHOLD: usize = 64;

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Particles { points: Vec<f64>, weights: Vec<f64> },
    /// Cell-centred density on `x_lo + j * dx`; cell mass is `density[j] * dx`.
    Grid { x_lo: f64, dx: f64, density: Vec<f64> },
}

/// A probability measure on the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    repr: Repr,
}

impl Measure {
    /// Weighted particles; weights are renormalised to total mass one.
    pub fn particles(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid("particle measure needs matching, nonempty points and weights"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("particle positions must be finite"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("particle weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("particle weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Measure {
            repr: Repr::Particles { points, weights },
        })
    }

    /// Uniformly weighted particles. Caller guarantees finiteness.
    pub(crate) fn uniform_unchecked(points: Vec<f64>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Measure {
            repr: Repr::Particles { points, weights },
        }
    }

    pub fn dirac(x: f64) -> Self {
        Measure {
            repr: Repr::Particles {
                points: vec![x],
                weights: vec![1.0],
            },
        }
    }

    /// Grid density; values are renormalised so that `Σ p_j dx = 1`.
    pub fn grid(x_lo: f64, dx: f64, density: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x_lo.is_finite() {
            return Err(Error::invalid("grid spacing must be strictly positive"));
        }
        if density.is_empty() || density.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("grid density must be nonempty, finite and nonnegative"));
        }
        let mass: f64 = density.iter().sum::<f64>() * dx;
        if mass <= 0.0 {
            return Err(Error::invalid("grid density has zero mass"));
        }
        let density = density.into_iter().map(|p| p / mass).collect();
        Ok(Measure {
            repr: Repr::Grid { x_lo, dx, density },
        })
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.repr, Repr::Grid { .. })
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Particles { points, .. } => points.len(),
            Repr::Grid { density, .. } => density.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mass(&self) -> f64 {
        match &self.repr {
            Repr::Particles { weights, .. } => weights.iter().sum(),
            Repr::Grid { dx, density, .. } => density.iter().sum::<f64>() * dx,
        }
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() <= MASS_TOL
    }

    /// `∫ f dμ` by the native quadrature (particle sum or cell sum).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        match &self.repr {
            Repr::Particles { points, weights } => {
                points.iter().zip(weights).map(|(x, w)| w * f(*x)).sum()
            }
            Repr::Grid { x_lo, dx, density } => {
                density
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * f(x_lo + j as f64 * dx))
                    .sum::<f64>()
                    * dx
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate(|x| (x - m) * (x - m))
    }

    /// Nodes and weights of the equivalent particle measure (grid nodes carry
    /// their cell mass).
    pub fn atoms(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.repr {
            Repr::Particles { points, weights } => (points.clone(), weights.clone()),
            Repr::Grid { x_lo, dx, density } => (
                (0..density.len()).map(|j| x_lo + j as f64 * dx).collect(),
                density.iter().map(|p| p * dx).collect(),
            ),
        }
    }

    pub fn to_particles(&self) -> Measure {
        let (points, weights) = self.atoms();
        Measure {
            repr: Repr::Particles { points, weights },
        }
    }

    /// Translate the measure by `c`.
    pub fn shifted(&self, c: f64) -> Measure {
        let repr = match &self.repr {
            Repr::Particles { points, weights } => Repr::Particles {
                points: points.iter().map(|x| x + c).collect(),
                weights: weights.clone(),
            },
            Repr::Grid { x_lo, dx, density } => Repr::Grid {
                x_lo: x_lo + c,
                dx: *dx,
                density: density.clone(),
            },
        };
        Measure { repr }
    }

    /// Mixture `(1 − θ) self + θ other` as a particle union.
    pub fn mix(&self, other: &Measure, theta: f64) -> Measure {
        let (mut pa, wa) = self.atoms();
        let (pb, wb) = other.atoms();
        let mut w: Vec<f64> = wa.into_iter().map(|w| w * (1.0 - theta)).collect();
        pa.extend(pb);
        w.extend(wb.into_iter().map(|w| w * theta));
        Measure {
            repr: Repr::Particles {
                points: pa,
                weights: w,
            },
        }
    }

    /// Sorted atoms with their weights, zero-weight atoms dropped.
    fn sorted_atoms(&self) -> Vec<(f64, f64)> {
        let (p, w) = self.atoms();
        let mut a: Vec<(f64, f64)> = p.into_iter().zip(w).filter(|(_, w)| *w > 0.0).collect();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        a
    }

    /// Quantile compression to `n` equally weighted atoms at the mid-quantiles.
    pub fn compress(&self, n: usize) -> Measure {
        let atoms = self.sorted_atoms();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut out = Vec::with_capacity(n);
        let mut cum = 0.0;
        let mut k = 0;
        for i in 0..n {
            let target = (i as f64 + 0.5) / n as f64 * total;
            while k + 1 < atoms.len() && cum + atoms[k].1 < target {
                cum += atoms[k].1;
                k += 1;
            }
            out.push(atoms[k].0);
        }
        Measure::uniform_unchecked(out)
    }

    fn uniform_points(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Particles { points, weights } => {
                let w0 = weights[0];
                if weights.iter().all(|w| (w - w0).abs() <= 1e-15) {
                    Some(points)
                } else {
                    None
                }
            }
            Repr::Grid { .. } => None,
        }
    }

    /// CSV with columns `(x, weight)` for particles or `(x, density)` for grids.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match &self.repr {
            Repr::Particles { points, weights } => {
                wr.write_record(["x", "weight"])?;
                for (x, p) in points.iter().zip(weights) {
                    wr.write_record([x.to_string(), p.to_string()])?;
                }
            }
            Repr::Grid { x_lo, dx, density } => {
                wr.write_record(["x", "density"])?;
                for (j, p) in density.iter().enumerate() {
                    wr.write_record([(x_lo + j as f64 * dx).to_string(), p.to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let kind = headers.get(1).unwrap_or("").to_string();
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::invalid("short CSV row"))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number in measure CSV: {e}")))
            };
            xs.push(parse(0)?);
            vs.push(parse(1)?);
        }
        match kind.as_str() {
            "weight" => Measure::particles(xs, vs),
            "density" => {
                if xs.len() < 2 {
                    return Err(Error::invalid("grid measure needs at least two nodes"));
                }
                let dx = xs[1] - xs[0];
                for pair in xs.windows(2) {
                    if ((pair[1] - pair[0]) - dx).abs() > 1e-9 * dx.abs().max(1.0) {
                        return Err(Error::invalid("grid measure nodes are not uniform"));
                    }
                }
                Measure::grid(xs[0], dx, vs)
            }
            other => Err(Error::invalid(format!("unknown measure column '{other}'"))),
        }
    }
}

/// Uniformly weighted empirical measure of the samples.
pub fn empirical_measure(samples: &[f64]) -> Result<Measure> {
    if samples.is_empty() {
        return Err(Error::invalid("empirical measure of an empty sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    Ok(Measure::uniform_unchecked(samples.to_vec()))
}

/// Truncated Wasserstein distance `inf E[|X − Y| ∧ 1]` between two measures.
///
/// The monotone (quantile) coupling is evaluated under the truncated cost,
/// which is never worse than `min(W1, 1)`. When both measures are uniform
/// particle sets of the same size `n ≤ EXACT_ASSIGNMENT_THRESHOLD` the exact
/// optimum is obtained from an assignment problem instead.
pub fn marginal_distance(a: &Measure, b: &Measure) -> Result<f64> {
    if !a.is_normalized() || !b.is_normalized() {
        return Err(Error::invalid("marginal_distance needs normalised measures"));
    }
    let quantile = quantile_coupling_cost(&a.sorted_atoms(), &b.sorted_atoms());
    if let (Some(pa), Some(pb)) = (a.uniform_points(), b.uniform_points()) {
        let n = pa.len();
        if n == pb.len() && n <= EXACT_ASSIGNMENT_THRESHOLD {
            let cost: Vec<Vec<f64>> = pa
                .iter()
                .map(|x| pb.iter().map(|y| (x - y).abs().min(1.0)).collect())
                .collect();
            let (_, total) = solve_assignment(&cost);
            return Ok((total / n as f64).min(quantile).clamp(0.0, 1.0));
        }
    }
    Ok(quantile.clamp(0.0, 1.0))
}

fn quantile_coupling_cost(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    loop {
        let step = ra.min(rb);
        cost += step * (a[i].0 - b[j].0).abs().min(1.0);
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_measure_examples() {
        let m = empirical_measure(&[0.0]).unwrap();
        assert_eq!(m.atoms(), (vec![0.0], vec![1.0]));
        let m = empirical_measure(&[1.0, 1.0, 1.0]).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-15);
        assert_eq!(m.mean(), 1.0);
        let m = empirical_measure(&[0.0, 1.0]).unwrap();
        assert_eq!(m.atoms().1, vec![0.5, 0.5]);
        assert_eq!(m.mean(), 0.5);
    }

    #[test]
    fn empirical_measure_rejects_bad_input() {
        assert!(matches!(empirical_measure(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(
            empirical_measure(&[0.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn marginal_distance_examples() {
        let d0 = Measure::dirac(0.0);
        assert_eq!(marginal_distance(&d0, &d0).unwrap(), 0.0);
        assert!((marginal_distance(&d0, &Measure::dirac(0.3)).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(marginal_distance(&d0, &Measure::dirac(5.0)).unwrap(), 1.0);
    }

    #[test]
    fn truncation_beats_monotone_coupling() {
        // {0, 1} vs {1, 2}: the monotone pairing costs 1 per pair, while
        // 0 ↔ 2 (capped at 1) and 1 ↔ 1 (free) average 0.5.
        let a = empirical_measure(&[0.0, 1.0]).unwrap();
        let b = empirical_measure(&[1.0, 2.0]).unwrap();
        assert!((marginal_distance(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        // {0, 1.6} vs {0.8, 2.4}: crossing costs (1 + 0.8)/2 = 0.9, so the
        // monotone value 0.8 is optimal.
        let a = empirical_measure(&[0.0, 1.6]).unwrap();
        let b = empirical_measure(&[0.8, 2.4]).unwrap();
        assert!((marginal_distance(&a, &b).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn grid_and_particle_routes_agree() {
        let dx = 0.01;
        let dens: Vec<f64> = (0..1001)
            .map(|j| {
                let x = -5.0 + j as f64 * dx;
                (-0.5 * x * x).exp()
            })
            .collect();
        let g = Measure::grid(-5.0, dx, dens).unwrap();
        assert!(g.is_normalized());
        assert!(g.mean().abs() < 1e-12);
        assert!((g.variance() - 1.0).abs() < 1e-4);
        let p = g.to_particles();
        assert!(marginal_distance(&g, &p).unwrap() < 1e-12);
        assert!((marginal_distance(&g, &g.shifted(0.25)).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn unnormalised_input_is_rejected() {
        let m = Measure {
            repr: Repr::Particles {
                points: vec![0.0],
                weights: vec![2.0],
            },
        };
        assert!(matches!(
            marginal_distance(&m, &Measure::dirac(0.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn compress_keeps_quantiles() {
        let pts: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let m = empirical_measure(&pts).unwrap();
        let c = m.compress(10);
        assert_eq!(c.len(), 10);
        assert!((c.mean() - 0.5).abs() < 2e-3);
    }

    #[test]
    fn csv_roundtrip() {
        let m = Measure::particles(vec![0.0, 1.5], vec![1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x,weight\n0,0.25\n1.5,0.75\n");
        assert_eq!(Measure::read_csv(&buf[..]).unwrap(), m);
    }
}
