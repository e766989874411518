//! Eigendecomposition of a covariance surface viewed as an integral operator
//! under trapezoidal quadrature.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSurface;
use crate::error::{Error, Result};
use crate::grid;

/// Maximum tolerated deviation from orthonormality.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// Leading eigenpairs of a covariance operator on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    /// Non-negative, descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenfunctions[k][j]` is the `k`-th eigenfunction at time node `j`.
    pub eigenfunctions: Vec<Vec<f64>>,
}

impl EigenSystem {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid_size(&self) -> usize {
        self.eigenfunctions.first().map_or(0, Vec::len)
    }

    /// `k`-th eigenfunction at `t`, linearly interpolated.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        grid::interp(&self.eigenfunctions[k], t)
    }

    /// Largest `|<phi_j, phi_k> - delta_jk|` under trapezoid weights.
    pub fn orthonormality_residual(&self) -> f64 {
        let w = grid::trapezoid_weights(self.grid_size());
        let mut worst = 0.0f64;
        for (j, a) in self.eigenfunctions.iter().enumerate() {
            for (k, b) in self.eigenfunctions.iter().enumerate().skip(j) {
                let ip: f64 = a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y * w).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Smallest `J` whose leading eigenvalues explain at least `fraction` of the
    /// total, capped at `cap` and at the number of components.
    pub fn select_count(&self, fraction: f64, cap: usize) -> usize {
        let total: f64 = self.eigenvalues.iter().sum();
        let limit = cap.min(self.count()).max(1);
        if !(total > 0.0) {
            return 1;
        }
        let mut acc = 0.0;
        for (k, l) in self.eigenvalues.iter().enumerate().take(limit) {
            acc += l;
            if acc >= fraction * total {
                return k + 1;
            }
        }
        limit
    }

    /// Keeps the first `count` components.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            eigenvalues: self.eigenvalues[..count].to_vec(),
            eigenfunctions: self.eigenfunctions[..count].to_vec(),
        }
    }
}

/// Leading `count` eigenpairs of the operator `f -> int C(., t) f(t) dt`.
///
/// The operator is discretized symmetrically as `W^(1/2) C W^(1/2)` with
/// trapezoid weights `W`; eigenvectors are mapped back by `W^(-1/2)`.
/// Negative eigenvalues are clipped to zero. Each eigenfunction is oriented
/// so that its integral is non-negative, with ties broken by a positive
/// value at `t = 0`.
pub fn eigendecompose(surface: &CovarianceSurface, count: usize) -> Result<EigenSystem> {
    let g = surface.grid_size();
    if count == 0 || count > g {
        return Err(Error::param("ncomp", format!("must lie in 1..={g}, got {count}")));
    }
    let w = grid::trapezoid_weights(g);
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let a = DMatrix::from_fn(g, g, |i, j| sw[i] * surface.get(i, j) * sw[j]);
    let eig = SymmetricEigen::new(a);

    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenfunctions = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let v = eig.eigenvectors.column(k);
        let mut phi: Vec<f64> = (0..g).map(|j| v[j] / sw[j]).collect();
        let integral = grid::trapezoid(&phi);
        let flip = if integral.abs() > 1e-10 {
            integral < 0.0
        } else {
            phi[0] < 0.0
        };
        if flip {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
        eigenfunctions.push(phi);
    }
    let sys = EigenSystem {
        eigenvalues,
        eigenfunctions,
    };
    let resid = sys.orthonormality_residual();
    if !(resid < ORTHONORMALITY_TOL) {
        return Err(Error::Conditioning(format!("eigenfunctions not orthonormal (residual {resid:e})")));
    }
    Ok(sys)
}
