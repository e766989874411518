//! The transport space: non-decreasing maps of `[0, 1]` onto itself with
//! `T(0) = 0` and `T(1) = 1`, together with the scalar multiplication that
//! moves a map along its geodesic through the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::measure::{check_p, GridMeasure};

const TOL: f64 = 1e-12;

/// A monotone transport map sampled at `u_j = j / (M - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TransportMap {
    tvals: Vec<f64>,
}

impl TransportMap {
    /// Validates values against the transport-space constraints (up to a
    /// `1e-12` rounding slack, which is then snapped away).
    pub fn new(tvals: Vec<f64>) -> Result<Self> {
        let m = tvals.len();
        if m < 2 {
            return Err(Error::InvalidInput(format!("a transport grid needs at least 2 points, got {m}")));
        }
        if let Some(bad) = tvals.iter().find(|v| !v.is_finite() || **v < -TOL || **v > 1.0 + TOL) {
            return Err(Error::Domain(format!("transport value {bad} outside [0, 1]")));
        }
        if tvals[0].abs() > TOL || (tvals[m - 1] - 1.0).abs() > TOL {
            return Err(Error::Domain(format!(
                "transport endpoints must be 0 and 1, got {} and {}",
                tvals[0],
                tvals[m - 1]
            )));
        }
        if !grid::is_monotone(&tvals, TOL) {
            return Err(Error::InvalidInput("transport values must be non-decreasing".into()));
        }
        Ok(Self::from_monotone(tvals))
    }

    /// Clamps to `[0, 1]`, pins the endpoints and removes rounding-level
    /// decreases. Only for values that are monotone by construction.
    pub(crate) fn from_monotone(mut tvals: Vec<f64>) -> Self {
        let m = tvals.len();
        tvals[0] = 0.0;
        tvals[m - 1] = 1.0;
        let mut run = 0.0_f64;
        for v in tvals.iter_mut() {
            *v = v.clamp(0.0, 1.0).max(run);
            run = *v;
        }
        Self { tvals }
    }

    pub fn identity(grid_size: usize) -> Self {
        Self {
            tvals: grid::nodes(grid_size),
        }
    }

    /// Samples `f` at the grid arguments and validates the result.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..grid_size).map(|j| f(grid::node(j, grid_size))).collect())
    }

    pub fn tvals(&self) -> &[f64] {
        &self.tvals
    }

    pub fn grid_size(&self) -> usize {
        self.tvals.len()
    }

    /// `T(u)` by linear interpolation.
    pub fn eval(&self, u: f64) -> f64 {
        grid::interp(&self.tvals, u)
    }

    pub fn is_identity(&self) -> bool {
        self.tvals
            .iter()
            .enumerate()
            .all(|(j, &v)| v == grid::node(j, self.tvals.len()))
    }

    /// `T(u) - u` on the grid.
    pub(crate) fn displacement(&self) -> Vec<f64> {
        let m = self.tvals.len();
        self.tvals
            .iter()
            .enumerate()
            .map(|(j, v)| v - grid::node(j, m))
            .collect()
    }
}

impl TryFrom<Vec<f64>> for TransportMap {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TransportMap> for Vec<f64> {
    fn from(t: TransportMap) -> Self {
        t.tvals
    }
}

fn same_grid(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::IncompatibleGrid(a, b));
    }
    Ok(())
}

/// Optimal transport `F_to^{-1} o F_from` between two quantile-grid measures.
///
/// Flat stretches of `from`'s quantile function (atoms) are inverted
/// left-continuously; a warning is logged since the map is then only one of
/// several optimal couplings.
pub fn optimal_transport(from: &GridMeasure, to: &GridMeasure) -> Result<TransportMap> {
    same_grid(from.grid_size(), to.grid_size())?;
    if from == to {
        return Ok(TransportMap::identity(from.grid_size()));
    }
    let q = from.qvals();
    let flats = q.windows(2).filter(|w| w[1] == w[0]).count();
    if flats > 0 {
        log::warn!(
            "source measure has {flats} flat quantile interval(s) of {}; using the generalized inverse",
            q.len() - 1
        );
    }
    let m = from.grid_size();
    let tvals = (0..m)
        .map(|j| to.quantile(from.cdf(grid::node(j, m))))
        .collect();
    Ok(TransportMap::from_monotone(tvals))
}

/// Generalized (left-continuous) inverse map.
pub fn invert(map: &TransportMap) -> TransportMap {
    let m = map.grid_size();
    let tvals = (0..m)
        .map(|j| grid::inverse_at(&map.tvals, grid::node(j, m)))
        .collect();
    TransportMap::from_monotone(tvals)
}

/// Scalar multiplication `alpha (.) T` for `alpha` in `[-1, 1]`:
/// `u + alpha (T(u) - u)` for positive `alpha`, the identity at zero and
/// `u + alpha (u - T^{-1}(u))` for negative `alpha`.
pub fn scalar_mult(alpha: f64, map: &TransportMap) -> Result<TransportMap> {
    if !(alpha.abs() <= 1.0) {
        return Err(Error::param("alpha", format!("must lie in [-1, 1], got {alpha}")));
    }
    let m = map.grid_size();
    if alpha == 0.0 {
        return Ok(TransportMap::identity(m));
    }
    if alpha == 1.0 {
        return Ok(map.clone());
    }
    if alpha == -1.0 {
        return Ok(invert(map));
    }
    let tvals = if alpha > 0.0 {
        map.tvals
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let u = grid::node(j, m);
                u + alpha * (t - u)
            })
            .collect()
    } else {
        let inv = invert(map);
        inv.tvals
            .iter()
            .enumerate()
            .map(|(j, &ti)| {
                let u = grid::node(j, m);
                u + alpha * (u - ti)
            })
            .collect()
    };
    Ok(TransportMap::from_monotone(tvals))
}

/// Overall direction of a transport: the sign of `int (T(u) - u) du`.
pub fn sign(map: &TransportMap) -> i8 {
    let s = grid::trapezoid(&map.displacement());
    if s > 0.0 {
        1
    } else if s < 0.0 {
        -1
    } else {
        0
    }
}

/// Transport norm `int |T(u) - u| du`, the `d_W1` distance to the identity.
pub fn norm1(map: &TransportMap) -> f64 {
    let d: Vec<f64> = map.displacement().into_iter().map(f64::abs).collect();
    grid::trapezoid(&d)
}

/// `d_{W,p}` between transport maps (the `L^p` distance of their values).
pub fn transport_distance(a: &TransportMap, b: &TransportMap, p: f64) -> Result<f64> {
    same_grid(a.grid_size(), b.grid_size())?;
    check_p(p)?;
    Ok(grid::lp_distance(&a.tvals, &b.tvals, p))
}

/// Constant-speed geodesic `(2s - 1) (.) T` from `T^{-1}` (s = 0) to `T` (s = 1).
pub fn geodesic(map: &TransportMap, s: f64) -> Result<TransportMap> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::param("s", format!("must lie in [0, 1], got {s}")));
    }
    scalar_mult(2.0 * s - 1.0, map)
}

/// `id + a (T - id)` for unrestricted `a >= 0`, in the ambient `L^1` space.
fn ray(map: &TransportMap, a: f64) -> Vec<f64> {
    let m = map.grid_size();
    map.tvals
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let u = grid::node(j, m);
            u + a * (t - u)
        })
        .collect()
}

fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(f(lo)).min(f(hi))
}

/// Distance from `query` to the equivalence class of `rep`, i.e. the smallest
/// `d_W1` from `query` to a map sharing a geodesic ray with `rep`.
///
/// Both one-parameter objectives are convex in the ray coordinate, so a
/// golden-section search to `1e-8` locates each minimum.
pub fn equiv_class_distance(query: &TransportMap, rep: &TransportMap) -> Result<f64> {
    same_grid(query.grid_size(), rep.grid_size())?;
    let q = query.tvals();
    let r = rep.tvals();
    let toward_rep = golden_min(|a| grid::lp_distance(q, &ray(rep, a), 1.0), 0.0, 1.0, 1e-8);
    let toward_query = golden_min(|a| grid::lp_distance(&ray(query, a), r, 1.0), 0.0, 1.0, 1e-8);
    Ok(toward_rep.min(toward_query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M: usize = 101;
    const STEP: f64 = 1.0 / (M - 1) as f64;

    fn square() -> TransportMap {
        TransportMap::from_fn(M, |u| u * u).unwrap()
    }

    fn sup(a: &TransportMap, b: &TransportMap) -> f64 {
        a.tvals()
            .iter()
            .zip(b.tvals())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Random strictly increasing map: cumulative sums of positive increments.
    fn random_map(incs: &[f64]) -> TransportMap {
        let total: f64 = incs.iter().sum();
        let mut v = vec![0.0];
        let mut acc = 0.0;
        for x in incs {
            acc += x;
            v.push(acc / total);
        }
        TransportMap::new(v).unwrap()
    }

    fn increments() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, M - 1)
    }

    #[test]
    fn constructor_rejects_invalid_maps() {
        assert!(TransportMap::new(vec![0.1, 1.0]).is_err());
        assert!(TransportMap::new(vec![0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(TransportMap::new(vec![0.0]).is_err());
    }

    #[test]
    fn optimal_transport_examples() {
        let unif = GridMeasure::uniform(M);
        let sq = GridMeasure::from_fn(M, |p| p * p).unwrap();
        assert!(sup(&optimal_transport(&sq, &sq).unwrap(), &TransportMap::identity(M)) < 1e-15);
        assert!(sup(&optimal_transport(&unif, &sq).unwrap(), &square()) < 1e-15);
        let root = optimal_transport(&sq, &unif).unwrap();
        for (j, v) in root.tvals().iter().enumerate() {
            assert!((v - grid::node(j, M).sqrt()).abs() < 2.0 * STEP.sqrt(), "j={j}");
        }
        // away from the singular slope at 0 the interpolation error is O(1/M)
        assert!((root.eval(0.25) - 0.5).abs() < STEP);
        assert!(matches!(
            optimal_transport(&unif, &GridMeasure::uniform(5)),
            Err(Error::IncompatibleGrid(..))
        ));
    }

    #[test]
    fn scalar_mult_branches() {
        let t = square();
        assert!(scalar_mult(0.0, &t).unwrap().is_identity());
        assert_eq!(scalar_mult(1.0, &t).unwrap(), t);
        assert_eq!(scalar_mult(-1.0, &t).unwrap(), invert(&t));
        let half = scalar_mult(0.5, &t).unwrap();
        assert!((half.eval(0.5) - 0.375).abs() < 1e-15);
        assert!(matches!(scalar_mult(1.5, &t), Err(Error::InvalidParameter { .. })));
        assert!(scalar_mult(f64::NAN, &t).is_err());
    }

    #[test]
    fn invert_examples() {
        let id = TransportMap::identity(M);
        assert_eq!(invert(&id), id);
        let root = invert(&square());
        for (j, v) in root.tvals().iter().enumerate() {
            let u = grid::node(j, M);
            // sqrt is not Lipschitz at 0; the grid inverse is exact at u = k^2 / 100^2
            assert!((v - u.sqrt()).abs() < 2.0 * STEP + if u < 0.05 { 0.05 } else { 0.0 });
        }
        // plateau on [0.4, 0.6] at 0.5
        let plateau = TransportMap::from_fn(M, |u| {
            if u < 0.4 {
                u * 1.25
            } else if u <= 0.6 {
                0.5
            } else {
                0.5 + (u - 0.6) * 1.25
            }
        })
        .unwrap();
        let inv = invert(&plateau);
        assert!((inv.eval(0.5) - 0.4).abs() < 1e-12);
        assert!((inv.eval(0.51) - (0.6 + 0.01 / 1.25)).abs() < 1e-9);
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign(&TransportMap::identity(M)), 0);
        assert_eq!(sign(&square()), -1);
        assert_eq!(sign(&TransportMap::from_fn(M, f64::sqrt).unwrap()), 1);
    }

    #[test]
    fn norm_and_distance_examples() {
        let t = square();
        assert_eq!(norm1(&TransportMap::identity(M)), 0.0);
        assert!((norm1(&t) - 1.0 / 6.0).abs() < 1e-4);
        assert!((transport_distance(&TransportMap::identity(M), &t, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-4);
        assert_eq!(transport_distance(&t, &t, 2.0).unwrap(), 0.0);
        let d = transport_distance(&invert(&t), &t, 1.0).unwrap();
        assert!((d - 2.0 * norm1(&t)).abs() < 4.0 * STEP);
    }

    #[test]
    fn geodesic_examples() {
        let t = square();
        assert!(geodesic(&t, 0.5).unwrap().is_identity());
        assert_eq!(geodesic(&t, 1.0).unwrap(), t);
        let end = transport_distance(&geodesic(&t, 0.0).unwrap(), &t, 1.0).unwrap();
        let mid = transport_distance(&geodesic(&t, 0.25).unwrap(), &geodesic(&t, 0.75).unwrap(), 1.0).unwrap();
        assert!((mid - 0.5 * end).abs() < 1e-8 * M as f64);
        assert!(geodesic(&t, 1.1).is_err());
    }

    #[test]
    fn equivalence_class_examples() {
        let t = TransportMap::from_fn(M, |u| u.powf(0.6)).unwrap();
        let member = scalar_mult(0.3, &t).unwrap();
        assert!(equiv_class_distance(&member, &t).unwrap() < 1e-6);
        assert!(equiv_class_distance(&t, &t).unwrap() < 1e-9);
        assert!(equiv_class_distance(&TransportMap::identity(M), &t).unwrap() < 1e-12);
        // the inverse lies on the opposite ray
        assert!(equiv_class_distance(&invert(&t), &t).unwrap() > 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sign_is_multiplicative(incs in increments(), alpha in -1.0f64..=1.0) {
            let t = random_map(&incs);
            prop_assume!(grid::trapezoid(&t.displacement()).abs() > 1e-3);
            let lhs = sign(&scalar_mult(alpha, &t).unwrap());
            let rhs = if alpha == 0.0 { 0 } else { alpha.signum() as i8 * sign(&t) };
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn constant_speed_geodesic(incs in increments(), s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0) {
            let t = random_map(&incs);
            let full = transport_distance(&geodesic(&t, 0.0).unwrap(), &geodesic(&t, 1.0).unwrap(), 1.0).unwrap();
            let part = transport_distance(&geodesic(&t, s1).unwrap(), &geodesic(&t, s2).unwrap(), 1.0).unwrap();
            prop_assert!((part - (s2 - s1).abs() * full).abs() < 5.0 * STEP);
        }

        #[test]
        fn norm_symmetry_and_homogeneity(incs in increments(), alpha in 0.0f64..=1.0, beta in -1.0f64..0.0) {
            let t = random_map(&incs);
            let n = norm1(&t);
            prop_assert!((n - norm1(&invert(&t))).abs() < 2.0 * STEP);
            prop_assert!((norm1(&scalar_mult(alpha, &t).unwrap()) - alpha * n).abs() < 1e-12);
            prop_assert!((norm1(&scalar_mult(beta, &t).unwrap()) - beta.abs() * n).abs() < 2.0 * STEP);
        }

        #[test]
        fn double_inverse_roundtrip(incs in increments()) {
            let t = random_map(&incs);
            prop_assert!(sup(&invert(&invert(&t)), &t) < 2.0 * STEP);
        }

        #[test]
        fn equivalence_is_transitive(incs in increments(), a in 0.05f64..=1.0, b in 0.05f64..=1.0) {
            let c = random_map(&incs);
            let bm = scalar_mult(b, &c).unwrap();
            let am = scalar_mult(a, &bm).unwrap();
            prop_assert!(equiv_class_distance(&am, &c).unwrap() < 1e-6);
        }

        #[test]
        fn outputs_stay_in_transport_space(incs in increments(), alpha in -1.0f64..=1.0) {
            let t = random_map(&incs);
            for out in [scalar_mult(alpha, &t).unwrap(), invert(&t)] {
                prop_assert!(TransportMap::new(out.tvals().to_vec()).is_ok());
            }
        }
    }
}
