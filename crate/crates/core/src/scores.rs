//! Principal component scores: plain averages for dense designs and best
//! linear predictors for sparse designs.

use nalgebra::{DMatrix, DVector};

use crate::covariance::CovarianceSurface;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};

/// Condition number above which the ridge is added.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Default ridge factor, relative to `trace / N_i`.
pub const DEFAULT_RIDGE: f64 = 1e-8;

fn check_count(count: usize, eig: &EigenSystem) -> Result<()> {
    if count == 0 || count > eig.count() {
        return Err(Error::param(
            "ncomp",
            format!("must lie in 1..={}, got {count}", eig.count()),
        ));
    }
    Ok(())
}

/// Scores `(1 / N_i) sum_j value_ij phi_k(t_ij)` for `k < count`.
pub fn dense_scores(values: &[(f64, f64)], eig: &EigenSystem, count: usize) -> Result<Vec<f64>> {
    check_count(count, eig)?;
    if values.is_empty() {
        return Err(Error::InvalidInput("subject has no observations".into()));
    }
    let n = values.len() as f64;
    Ok((0..count)
        .map(|k| values.iter().map(|&(t, v)| v * eig.eval(k, t)).sum::<f64>() / n)
        .collect())
}

/// Best linear predictor scores `eta_l psi_l(t_i)^T Sigma_i^{-1} z_i` for
/// `l < count`, where `Sigma_i` is the covariance surface interpolated at the
/// subject's observation times.
///
/// When the condition number of `Sigma_i` exceeds [`CONDITION_LIMIT`],
/// `ridge * trace(Sigma_i) / N_i` is added to its diagonal.
pub fn pace_scores(
    values: &[(f64, f64)],
    eig: &EigenSystem,
    surface: &CovarianceSurface,
    count: usize,
    ridge: f64,
) -> Result<Vec<f64>> {
    check_count(count, eig)?;
    if values.is_empty() {
        return Err(Error::InvalidInput("subject has no observations".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::param("ridge", format!("must be non-negative, got {ridge}")));
    }
    let mut times: Vec<f64> = values.iter().map(|v| v.0).collect();
    times.sort_by(f64::total_cmp);
    if times.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("repeated observation times in one subject".into()));
    }
    if values.iter().all(|v| v.1 == 0.0) || eig.eigenvalues[..count].iter().all(|&l| l == 0.0) {
        return Ok(vec![0.0; count]);
    }

    let n = values.len();
    let mut sigma = DMatrix::from_fn(n, n, |a, b| surface.eval(values[a].0, values[b].0));
    let z = DVector::from_iterator(n, values.iter().map(|v| v.1));

    let spectrum = sigma.clone().symmetric_eigenvalues();
    let max = spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = spectrum.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(max > 0.0) || !(max / min <= CONDITION_LIMIT) {
        let bump = ridge * sigma.trace() / n as f64;
        log::debug!("ill-conditioned covariance block (cond {:e}); adding ridge {bump:e}", max / min);
        for d in 0..n {
            sigma[(d, d)] += bump;
        }
    }
    let solved = sigma
        .lu()
        .solve(&z)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Conditioning(format!("singular {n}x{n} covariance block after regularization")))?;
    Ok((0..count)
        .map(|l| {
            let proj: f64 = values.iter().zip(solved.iter()).map(|(&(t, _), s)| eig.eval(l, t) * s).sum();
            eig.eigenvalues[l] * proj
        })
        .collect())
}
