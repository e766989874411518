//! Equispaced grids on `[0, 1]`: node placement, trapezoidal quadrature and
//! piecewise-linear evaluation/inversion of grid-valued functions.
//!
//! Every grid-valued object in the crate (quantile functions, transport maps,
//! eigenfunctions, covariance rows) is sampled at `x_j = j / (len - 1)`.

/// The `j`-th node of an equispaced grid with `len` points on `[0, 1]`.
#[inline]
pub fn node(j: usize, len: usize) -> f64 {
    debug_assert!(len >= 2);
    j as f64 / (len - 1) as f64
}

/// All nodes of an equispaced grid with `len` points.
pub fn nodes(len: usize) -> Vec<f64> {
    (0..len).map(|j| node(j, len)).collect()
}

/// Trapezoidal quadrature weights for `len` equispaced nodes on `[0, 1]`.
pub fn trapezoid_weights(len: usize) -> Vec<f64> {
    let h = 1.0 / (len - 1) as f64;
    let mut w = vec![h; len];
    w[0] = 0.5 * h;
    w[len - 1] = 0.5 * h;
    w
}

/// Trapezoidal integral over `[0, 1]` of a function sampled on the grid.
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let inner: f64 = values[1..n - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
}

/// `(int |a - b|^p)^(1/p)` by the trapezoidal rule. Caller checks lengths and `p`.
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if p == 1.0 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        trapezoid(&d)
    } else {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).collect();
        trapezoid(&d).powf(1.0 / p)
    }
}

/// Evaluates the piecewise-linear interpolant of grid samples at `x`
/// (clamped to `[0, 1]`). Returns the stored sample exactly at nodes.
pub fn interp(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let pos = x.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    let frac = pos - k as f64;
    if frac == 0.0 {
        return values[k];
    }
    values[k] + frac * (values[k + 1] - values[k])
}

/// Left-continuous generalized inverse of a non-decreasing piecewise-linear
/// grid function: `inf { x : f(x) >= y }`, interpolated linearly on strictly
/// increasing segments. Values of `y` above `f(1)` map to `1`.
pub fn inverse_at(values: &[f64], y: f64) -> f64 {
    let n = values.len();
    let j = values.partition_point(|&v| v < y);
    if j == 0 {
        return 0.0;
    }
    if j == n {
        return 1.0;
    }
    // values[j - 1] < y <= values[j]
    let lo = values[j - 1];
    let hi = values[j];
    let frac = (y - lo) / (hi - lo);
    ((j - 1) as f64 + frac) / (n - 1) as f64
}

/// Pool-adjacent-violators projection onto non-decreasing sequences
/// (unit weights, least squares).
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    // blocks of (mean, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        let mut cur = (v, 1usize);
        while let Some(&(m, c)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let total = c + cur.1;
            cur = ((m * c as f64 + cur.0 * cur.1 as f64) / total as f64, total);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, c) in blocks {
        out.extend(std::iter::repeat_n(m, c));
    }
    out
}

/// Checks that a slice is non-decreasing up to `tol`.
pub(crate) fn is_monotone(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - tol)
}
