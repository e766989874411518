//! Raw covariance inputs for the multiplier process and its latent Gaussian
//! counterpart, and the two-dimensional local-linear covariance smoother.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::Observation;
use crate::grid;
use crate::kernel::Kernel;
use crate::link::Link;
use crate::transport::{norm1, sign, TransportMap};

/// Clamp width applied before the inverse link.
pub const LINK_CLAMP: f64 = 1e-6;

/// Covariance surface sampled on a `G x G` time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSurface {
    grid_size: usize,
    /// Row-major `G x G` values.
    values: Vec<f64>,
}

impl CovarianceSurface {
    /// Builds a surface from row-major values, checking shape, finiteness
    /// and symmetry.
    pub fn new(grid_size: usize, values: Vec<f64>) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::param("grid_size", "need at least 2 time points"));
        }
        if values.len() != grid_size * grid_size {
            return Err(Error::InvalidInput(format!(
                "expected {} surface values, got {}",
                grid_size * grid_size,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("surface has non-finite entries".into()));
        }
        for i in 0..grid_size {
            for j in 0..i {
                let (a, b) = (values[i * grid_size + j], values[j * grid_size + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!("surface is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { grid_size, values })
    }

    /// Samples `f(s, t)` on the grid and symmetrizes.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid_size * grid_size];
        for i in 0..grid_size {
            for j in 0..=i {
                let (s, t) = (grid::node(i, grid_size), grid::node(j, grid_size));
                let v = 0.5 * (f(s, t) + f(t, s));
                values[i * grid_size + j] = v;
                values[j * grid_size + i] = v;
            }
        }
        Self::new(grid_size, values)
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid_size + j]
    }

    /// Bilinear interpolation at `(s, t)`, exact at grid nodes.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let g = self.grid_size;
        let locate = |x: f64| {
            let pos = x.clamp(0.0, 1.0) * (g - 1) as f64;
            let k = (pos.floor() as usize).min(g - 2);
            (k, pos - k as f64)
        };
        let (i, fs) = locate(s);
        let (j, ft) = locate(t);
        let v00 = self.get(i, j);
        let v01 = self.get(i, j + 1);
        let v10 = self.get(i + 1, j);
        let v11 = self.get(i + 1, j + 1);
        let mut out = v00;
        if ft != 0.0 {
            out += ft * (v01 - v00);
        }
        if fs != 0.0 {
            out += fs * ((v10 + ft * (v11 - v10)) - (v00 + ft * (v01 - v00)));
        }
        out
    }
}

/// Multiplier values derived from one observed transport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub t: f64,
    /// `sign(T) ||T|| / norm_t0`, clamped into the open interval `(-1, 1)`.
    pub u: f64,
    /// Inverse link applied to `u`.
    pub z: f64,
    /// `sign(T) ||T|| / kappa`.
    pub scaled: f64,
}

/// Signed transport magnitudes of a subject, normalized by the baseline norm
/// and by the scale `kappa`, plus the latent values through the inverse link.
pub fn raw_scores(
    transports: &[Observation<TransportMap>],
    norm_t0: f64,
    link: Link,
    kappa: f64,
) -> Result<Vec<RawScore>> {
    if !(norm_t0 > 0.0) {
        return Err(Error::param("norm_t0", format!("must be positive, got {norm_t0}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
    }
    Ok(transports
        .iter()
        .map(|o| {
            let signed = f64::from(sign(&o.value)) * norm1(&o.value);
            let u = (signed / norm_t0).clamp(-1.0 + LINK_CLAMP, 1.0 - LINK_CLAMP);
            RawScore {
                t: o.t,
                u,
                z: link.inverse(u),
                scaled: signed / kappa,
            }
        })
        .collect())
}

/// One off-diagonal product `v_j v_l` at `(t_j, t_l)` with its subject weight.
#[derive(Debug, Clone, Copy)]
struct Pair {
    s: f64,
    t: f64,
    y: f64,
    w: f64,
}

/// Weighted moments of one local window, in offsets scaled by the bandwidth.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    s0: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
    r0: f64,
    rx: f64,
    ry: f64,
}

impl Moments {
    #[inline]
    fn add(&mut self, k: f64, dx: f64, dy: f64, y: f64) {
        self.s0 += k;
        self.sx += k * dx;
        self.sy += k * dy;
        self.sxx += k * dx * dx;
        self.syy += k * dy * dy;
        self.sxy += k * dx * dy;
        self.r0 += k * y;
        self.rx += k * y * dx;
        self.ry += k * y * dy;
    }

    /// Local-linear intercept, or `None` when the design is singular.
    fn intercept(&self) -> Option<f64> {
        if !(self.s0 > 0.0) {
            return None;
        }
        let (mx, my, m) = (self.sx / self.s0, self.sy / self.s0, self.r0 / self.s0);
        let vxx = self.sxx / self.s0 - mx * mx;
        let vyy = self.syy / self.s0 - my * my;
        let vxy = self.sxy / self.s0 - mx * my;
        let cx = self.rx / self.s0 - mx * m;
        let cy = self.ry / self.s0 - my * m;
        let det = vxx * vyy - vxy * vxy;
        if !(det > 1e-10 * vxx * vyy) || !(vxx * vyy > 1e-24) {
            return None;
        }
        let bx = (vyy * cx - vxy * cy) / det;
        let by = (vxx * cy - vxy * cx) / det;
        Some(m - bx * mx - by * my)
    }

    fn local_constant(&self) -> Option<f64> {
        (self.s0 > 0.0).then(|| self.r0 / self.s0)
    }
}

fn collect_pairs(raw: &[Vec<(f64, f64)>]) -> Vec<Pair> {
    let n = raw.len() as f64;
    let mut pairs = Vec::new();
    for (i, subject) in raw.iter().enumerate() {
        let ni = subject.len();
        if ni < 2 {
            log::warn!("subject {i} has {ni} observation(s); skipped by the covariance smoother");
            continue;
        }
        let w = 1.0 / (n * (ni * (ni - 1)) as f64);
        for (j, &(s, vs)) in subject.iter().enumerate() {
            for (l, &(t, vt)) in subject.iter().enumerate() {
                if j != l {
                    pairs.push(Pair { s, t, y: vs * vt, w });
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.s.total_cmp(&b.s).then(a.t.total_cmp(&b.t)));
    pairs
}

/// Moments at a single grid point by a full scan (used for retries).
fn point_moments(pairs: &[Pair], a: f64, b: f64, h: f64, kernel: Kernel) -> Moments {
    let mut m = Moments::default();
    for p in pairs {
        let (dx, dy) = ((p.s - a) / h, (p.t - b) / h);
        let k = p.w * kernel.eval(dx) * kernel.eval(dy);
        if k > 0.0 {
            m.add(k, dx, dy, p.y);
        }
    }
    m
}

/// Local-linear smoothing of off-diagonal raw products onto a `G x G` grid.
///
/// `raw[i]` lists subject `i`'s `(t_ij, value_ij)`; products `value_ij *
/// value_il` for `j != l` are weighted by `1 / (n N_i (N_i - 1))`. Subjects
/// with fewer than two points are skipped. A grid point with a singular local
/// design is retried with the bandwidth doubled up to three times; if the
/// design is still singular but the window holds data, the local-constant
/// fit is used.
pub fn smooth_covariance(raw: &[Vec<(f64, f64)>], h: f64, kernel: Kernel, grid_size: usize) -> Result<CovarianceSurface> {
    if !(h > 0.0) {
        return Err(Error::param("bandwidth", format!("must be positive, got {h}")));
    }
    if grid_size < 2 {
        return Err(Error::param("time_grid", "need at least 2 time points"));
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("no subjects to smooth".into()));
    }
    let pairs = collect_pairs(raw);
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no subject has two or more observations".into()));
    }
    let g = grid_size;
    let step = (g - 1) as f64;

    // Row a: scatter every pair in the s-window into the columns b >= a of its t-window.
    let rows: Vec<Vec<f64>> = (0..g)
        .into_par_iter()
        .map(|ia| {
            let a = grid::node(ia, g);
            let lo = pairs.partition_point(|p| p.s < a - h);
            let hi = pairs.partition_point(|p| p.s <= a + h);
            let mut acc = vec![Moments::default(); g];
            for p in &pairs[lo..hi] {
                let dx = (p.s - a) / h;
                let kx = p.w * kernel.eval(dx);
                if kx == 0.0 {
                    continue;
                }
                let b_lo = (((p.t - h) * step).floor().max(ia as f64)) as usize;
                let b_hi = (((p.t + h) * step).ceil().min(step)) as usize;
                for (ib, m) in acc.iter_mut().enumerate().take(b_hi + 1).skip(b_lo) {
                    let dy = (p.t - grid::node(ib, g)) / h;
                    let k = kx * kernel.eval(dy);
                    if k > 0.0 {
                        m.add(k, dx, dy, p.y);
                    }
                }
            }
            (ia..g)
                .map(|ib| match acc[ib].intercept() {
                    Some(v) => Ok(v),
                    None => retry(&pairs, a, grid::node(ib, g), h, kernel),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; g * g];
    for (ia, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let ib = ia + off;
            values[ia * g + ib] = v;
            values[ib * g + ia] = v;
        }
    }
    CovarianceSurface::new(g, values)
}

fn retry(pairs: &[Pair], a: f64, b: f64, h: f64, kernel: Kernel) -> Result<f64> {
    let mut hw = h;
    let mut last = Moments::default();
    for _ in 0..3 {
        hw *= 2.0;
        last = point_moments(pairs, a, b, hw, kernel);
        if let Some(v) = last.intercept() {
            log::debug!("covariance at ({a:.3}, {b:.3}) estimated with widened bandwidth {hw:.4}");
            return Ok(v);
        }
    }
    match last.local_constant() {
        Some(v) => {
            log::warn!("covariance at ({a:.3}, {b:.3}): local-linear design singular, using local-constant fit");
            Ok(v)
        }
        None => Err(Error::NotEstimable { s: a, t: b, h: hw }),
    }
}
