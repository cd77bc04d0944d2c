use crate::error::{Error, Result};

use super::assignment::solve_assignment;
use super::flow::MeasureFlow;
use super::measure::Measure;

/// `M` sample paths on one shared time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn new(times: Vec<f64>, paths: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("path ensemble needs at least one path"));
        }
        if paths.iter().any(|p| p.len() != times.len()) {
            return Err(Error::invalid("every path must live on the shared time grid"));
        }
        Ok(PathEnsemble { times, paths, seed })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Empirical marginal at time index `k`.
    pub fn marginal(&self, k: usize) -> Measure {
        Measure::uniform_unchecked(self.paths.iter().map(|p| p[k]).collect())
    }

    pub fn to_flow(&self) -> MeasureFlow {
        let measures = (0..self.times.len()).map(|k| self.marginal(k)).collect();
        MeasureFlow::new_unchecked(self.times.clone(), measures)
    }

    /// Keep the first `m` paths.
    pub fn truncated(&self, m: usize) -> PathEnsemble {
        PathEnsemble {
            times: self.times.clone(),
            paths: self.paths[..m.min(self.paths.len())].to_vec(),
            seed: self.seed,
        }
    }
}

/// Pairwise path cost `sup_t |x(t) − y(t)| ∧ 1`.
pub(crate) fn sup_cost(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        .min(1.0)
}

/// Empirical truncated path-space Wasserstein distance: the minimal average
/// cost of a one-to-one pairing of the two ensembles under
/// `sup_t |x(t) − y(t)| ∧ 1`. Exact for the empirical path laws themselves.
pub fn path_distance_dt(a: &PathEnsemble, b: &PathEnsemble) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "ensemble sizes differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12)
    {
        return Err(Error::invalid("ensembles live on different time grids"));
    }
    let cost: Vec<Vec<f64>> = a
        .paths
        .iter()
        .map(|x| b.paths.iter().map(|y| sup_cost(x, y)).collect())
        .collect();
    let (_, total) = solve_assignment(&cost);
    Ok((total / a.len() as f64).clamp(0.0, 1.0))
}
