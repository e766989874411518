//! Univariate probability measures on `[0, 1]`, stored as quantile functions
//! sampled at the probability levels `p_j = j / (M - 1)`.
//!
//! In one dimension every Wasserstein computation reduces to arithmetic on
//! quantile functions, so this is the only representation we keep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::transport::TransportMap;

const TOL: f64 = 1e-12;

/// A probability measure on `[0, 1]` given by its quantile function on an
/// equispaced level grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridMeasure {
    qvals: Vec<f64>,
}

impl GridMeasure {
    /// Validates quantile values: at least two levels, non-decreasing, inside `[0, 1]`.
    pub fn new(qvals: Vec<f64>) -> Result<Self> {
        if qvals.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a quantile grid needs at least 2 levels, got {}",
                qvals.len()
            )));
        }
        if let Some(bad) = qvals.iter().find(|q| !q.is_finite() || **q < -TOL || **q > 1.0 + TOL) {
            return Err(Error::Domain(format!("quantile value {bad} outside [0, 1]")));
        }
        if !grid::is_monotone(&qvals, TOL) {
            return Err(Error::InvalidInput("quantile values must be non-decreasing".into()));
        }
        Ok(Self::from_sorted(qvals))
    }

    /// Snaps values that passed validation (or came out of a monotone
    /// construction) onto the exact invariants.
    pub(crate) fn from_sorted(mut qvals: Vec<f64>) -> Self {
        let mut run = 0.0_f64;
        for q in qvals.iter_mut() {
            *q = q.clamp(0.0, 1.0).max(run);
            run = *q;
        }
        Self { qvals }
    }

    /// `Unif(0, 1)`: the identity quantile function.
    pub fn uniform(grid_size: usize) -> Self {
        Self {
            qvals: grid::nodes(grid_size),
        }
    }

    /// Quantile function sampled from a closure at the grid levels.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..grid_size).map(|j| f(grid::node(j, grid_size))).collect())
    }

    /// Interpolated empirical quantile function of `samples`.
    ///
    /// Order statistics sit at plotting positions `(k - 1) / (m - 1)`; a single
    /// sample gives a constant quantile function.
    pub fn empirical(samples: &[f64], grid_size: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        if grid_size < 2 {
            return Err(Error::param("grid_size", format!("need at least 2 levels, got {grid_size}")));
        }
        if let Some(bad) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("sample {bad} outside [0, 1]")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() == 1 {
            return Ok(Self {
                qvals: vec![sorted[0]; grid_size],
            });
        }
        let qvals = (0..grid_size)
            .map(|j| grid::interp(&sorted, grid::node(j, grid_size)))
            .collect();
        Ok(Self::from_sorted(qvals))
    }

    pub fn qvals(&self) -> &[f64] {
        &self.qvals
    }

    pub fn grid_size(&self) -> usize {
        self.qvals.len()
    }

    /// Quantile function at level `p` (linear interpolation).
    pub fn quantile(&self, p: f64) -> f64 {
        grid::interp(&self.qvals, p)
    }

    /// Left-continuous CDF obtained by inverting the quantile function.
    pub fn cdf(&self, x: f64) -> f64 {
        grid::inverse_at(&self.qvals, x)
    }

    /// Mean of the measure, `int_0^1 F^{-1}(p) dp`.
    pub fn mean(&self) -> f64 {
        grid::trapezoid(&self.qvals)
    }
}

impl TryFrom<Vec<f64>> for GridMeasure {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GridMeasure> for Vec<f64> {
    fn from(m: GridMeasure) -> Self {
        m.qvals
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("Wasserstein order must be >= 1, got {p}")));
    }
    Ok(())
}

/// `p`-Wasserstein distance: the `L^p` distance between quantile functions.
pub fn wasserstein_distance(a: &GridMeasure, b: &GridMeasure, p: f64) -> Result<f64> {
    if a.grid_size() != b.grid_size() {
        return Err(Error::IncompatibleGrid(a.grid_size(), b.grid_size()));
    }
    check_p(p)?;
    Ok(grid::lp_distance(&a.qvals, &b.qvals, p))
}

/// Push-forward `T # a`, whose quantile function is `T o F_a^{-1}`.
pub fn push_forward(map: &TransportMap, a: &GridMeasure) -> Result<GridMeasure> {
    if map.grid_size() != a.grid_size() {
        return Err(Error::IncompatibleGrid(map.grid_size(), a.grid_size()));
    }
    let q = a.qvals.iter().map(|&x| map.eval(x)).collect();
    Ok(GridMeasure::from_sorted(q))
}

/// Isometry from measures to transports: `F_mu^{-1} o F_Unif`, with the end
/// values pinned to 0 and 1.
pub fn measure_to_transport(a: &GridMeasure) -> TransportMap {
    TransportMap::from_monotone(a.qvals.clone())
}

/// Inverse isometry: `T # Unif(0, 1)`.
pub fn transport_to_measure(map: &TransportMap) -> GridMeasure {
    GridMeasure::from_sorted(map.tvals().to_vec())
}
