//! Transport-process model for densely observed subjects: sign-partitioned
//! baselines, the rescaled multiplier covariance, dense scores and
//! reconstruction of individual transport trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{raw_scores, smooth_covariance, CovarianceSurface};
use crate::eigen::{eigendecompose, EigenSystem};
use crate::error::{Error, Result};
use crate::frechet::{default_bandwidth, mean_transport, Panel};
use crate::grid;
use crate::kernel::Kernel;
use crate::link::Link;
use crate::scores::dense_scores;
use crate::transport::{norm1, scalar_mult, sign, TransportMap};

/// Baselines with a smaller norm are treated as the identity.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Sign-partitioned means of a subject's transports.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    /// Mean of transports with sign `+1` or `0`; the identity when there are none.
    pub plus: TransportMap,
    /// Mean of transports with sign `-1`; the identity when there are none.
    pub minus: TransportMap,
    pub n_plus: usize,
    pub n_minus: usize,
}

/// Splits transports by sign and averages each part.
pub fn estimate_baselines(transports: &[&TransportMap]) -> Result<Baselines> {
    let first = transports
        .first()
        .ok_or_else(|| Error::InvalidInput("no transports to average".into()))?;
    let m = first.grid_size();
    let (pos, neg): (Vec<&TransportMap>, Vec<&TransportMap>) = transports.iter().copied().partition(|t| sign(t) >= 0);
    let mean_or_id = |set: &[&TransportMap]| {
        if set.is_empty() {
            Ok(TransportMap::identity(m))
        } else {
            mean_transport(set.iter().copied())
        }
    };
    Ok(Baselines {
        plus: mean_or_id(&pos)?,
        minus: mean_or_id(&neg)?,
        n_plus: pos.len(),
        n_minus: neg.len(),
    })
}

/// A baseline rescaled to a target norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub map: TransportMap,
    /// Norm actually attained; below the requested value when the request
    /// would leave the transport space.
    pub norm: f64,
}

/// Rescales the displacement of `map` so that its norm equals `kappa`.
///
/// If the rescaled map would leave `[0, 1]` or stop being non-decreasing, the
/// largest feasible norm is used instead and a warning is logged.
pub fn rescale_baseline(map: &TransportMap, kappa: f64) -> Result<Rescaled> {
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
    }
    let norm = norm1(map);
    if !(norm > DEGENERATE_NORM) {
        return Err(Error::DegenerateBaseline);
    }
    let m = map.grid_size();
    let d = map.displacement();
    let step = 1.0 / (m - 1) as f64;
    let mut cmax = f64::INFINITY;
    for (j, &dj) in d.iter().enumerate() {
        let u = grid::node(j, m);
        if dj > 0.0 {
            cmax = cmax.min((1.0 - u) / dj);
        } else if dj < 0.0 {
            cmax = cmax.min(u / -dj);
        }
    }
    for w in d.windows(2) {
        let dd = w[1] - w[0];
        if dd < 0.0 {
            cmax = cmax.min(step / -dd);
        }
    }
    let mut c = kappa / norm;
    if c > cmax {
        log::debug!(
            "baseline norm {kappa} is infeasible for this transport; using {:.6}",
            cmax * norm
        );
        c = cmax;
    }
    let tvals: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(j, dj)| grid::node(j, m) + c * dj)
        .collect();
    let map = TransportMap::from_monotone(tvals);
    let norm = norm1(&map);
    Ok(Rescaled { map, norm })
}

/// Which baseline a subject's predictions are built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Baseline {
    /// Rescaled mean of the non-negative-sign transports.
    Positive(Rescaled),
    /// Rescaled mean of the negative-sign transports, used with a negated multiplier.
    Negative(Rescaled),
    /// No transport carries mass: predictions are the identity.
    Identity,
}

/// Per-subject state of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectFit {
    pub id: String,
    pub scores: Vec<f64>,
    pub baseline: Baseline,
    pub positive_set_empty: bool,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl SubjectFit {
    /// Estimates the subject's baseline from its transports.
    pub fn from_transports(id: impl Into<String>, scores: Vec<f64>, transports: &[&TransportMap], kappa: f64) -> Result<Self> {
        let b = estimate_baselines(transports)?;
        let id = id.into();
        let baseline = if b.n_plus > 0 && norm1(&b.plus) > DEGENERATE_NORM {
            Baseline::Positive(rescale_baseline(&b.plus, kappa)?)
        } else if b.n_minus > 0 && norm1(&b.minus) > DEGENERATE_NORM {
            Baseline::Negative(rescale_baseline(&b.minus, kappa)?)
        } else {
            log::warn!("subject `{id}`: every transport is the identity");
            Baseline::Identity
        };
        Ok(Self {
            id,
            scores,
            baseline,
            positive_set_empty: b.n_plus == 0,
            n_plus: b.n_plus,
            n_minus: b.n_minus,
        })
    }

    /// Uses a known baseline transport (rescaled to `kappa`) instead of an estimate.
    pub fn with_baseline(id: impl Into<String>, scores: Vec<f64>, baseline: &TransportMap, kappa: f64) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            scores,
            baseline: Baseline::Positive(rescale_baseline(baseline, kappa)?),
            positive_set_empty: false,
            n_plus: 0,
            n_minus: 0,
        })
    }
}

/// Settings of the dense fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseConfig {
    /// Target norm of the rescaled baselines.
    pub kappa: f64,
    /// Covariance bandwidth; `(n Nbar^2)^(-1/6)` when absent.
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    /// Number of time grid points for the covariance surface.
    pub time_grid: usize,
    /// Number of components; chosen by explained variance when absent.
    pub ncomp: Option<usize>,
    pub variance_fraction: f64,
    pub max_components: usize,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            time_grid: 51,
            ncomp: None,
            variance_fraction: 0.95,
            max_components: 20,
        }
    }
}

/// Output of [`fit_dense`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDenseModel {
    pub kappa: f64,
    /// Smoothed covariance of the rescaled multiplier process.
    pub surface: CovarianceSurface,
    /// All eigenpairs of the surface.
    pub eig: EigenSystem,
    /// Number of components used for reconstruction.
    pub ncomp: usize,
    pub subjects: Vec<SubjectFit>,
    pub config: DenseConfig,
}

impl FittedDenseModel {
    /// Assembles a model from externally supplied components.
    pub fn from_components(kappa: f64, eig: EigenSystem, ncomp: usize, subjects: Vec<SubjectFit>) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        if ncomp == 0 || ncomp > eig.count() {
            return Err(Error::param("ncomp", format!("must lie in 1..={}, got {ncomp}", eig.count())));
        }
        if let Some(s) = subjects.iter().find(|s| s.scores.len() < ncomp) {
            return Err(Error::InvalidInput(format!("subject `{}` has fewer than {ncomp} scores", s.id)));
        }
        let g = eig.grid_size();
        let surface = CovarianceSurface::from_fn(g, |a, b| {
            (0..eig.count())
                .map(|k| eig.eigenvalues[k] * eig.eval(k, a) * eig.eval(k, b))
                .sum()
        })?;
        Ok(Self {
            kappa,
            surface,
            eig,
            ncomp,
            subjects,
            config: DenseConfig {
                kappa,
                ncomp: Some(ncomp),
                ..Default::default()
            },
        })
    }

    pub fn subject(&self, id: &str) -> Result<&SubjectFit> {
        self.subjects
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::UnknownSubject(id.to_string()))
    }

    /// Truncated reconstruction of the rescaled multiplier at `t`.
    pub fn multiplier(&self, id: &str, t: f64) -> Result<f64> {
        check_time(t)?;
        let s = self.subject(id)?;
        Ok((0..self.ncomp).map(|k| s.scores[k] * self.eig.eval(k, t)).sum())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Fits the dense transport-process model to a centered panel.
pub fn fit_dense(panel: &Panel<TransportMap>, config: &DenseConfig) -> Result<FittedDenseModel> {
    let kappa = config.kappa;
    if !(kappa > 0.0) {
        return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
    }
    let h = config
        .bandwidth
        .unwrap_or_else(|| default_bandwidth(panel.len(), panel.mean_observations()));
    let raw: Vec<Vec<(f64, f64)>> = panel
        .subjects()
        .iter()
        .map(|s| {
            Ok(raw_scores(&s.observations, kappa, Link::default(), kappa)?
                .into_iter()
                .map(|r| (r.t, r.scaled))
                .collect())
        })
        .collect::<Result<_>>()?;
    let surface = smooth_covariance(&raw, h, config.kernel, config.time_grid)?;
    let eig = eigendecompose(&surface, config.time_grid)?;
    let ncomp = match config.ncomp {
        Some(j) if j == 0 || j > eig.count() => {
            return Err(Error::param("ncomp", format!("must lie in 1..={}, got {j}", eig.count())))
        }
        Some(j) => j,
        None => eig.select_count(config.variance_fraction, config.max_components),
    };
    let subjects = panel
        .subjects()
        .par_iter()
        .zip(raw.par_iter())
        .map(|(s, r)| {
            let scores = dense_scores(r, &eig, ncomp)?;
            let maps: Vec<&TransportMap> = s.observations.iter().map(|o| &o.value).collect();
            SubjectFit::from_transports(s.id.clone(), scores, &maps, kappa)
        })
        .collect::<Result<Vec<_>>>()?;
    report_capped(&subjects, kappa);
    Ok(FittedDenseModel {
        kappa,
        surface,
        eig,
        ncomp,
        subjects,
        config: DenseConfig {
            bandwidth: Some(h),
            ..config.clone()
        },
    })
}

/// Logs how many baselines could not reach the target norm.
pub(crate) fn report_capped(subjects: &[SubjectFit], target: f64) {
    let capped = subjects
        .iter()
        .filter(|s| match &s.baseline {
            Baseline::Positive(r) | Baseline::Negative(r) => r.norm < target * (1.0 - 1e-9),
            Baseline::Identity => false,
        })
        .count();
    if capped > 0 {
        log::info!(
            "{capped} of {} baselines cannot be rescaled to norm {target}; their feasible maximum is used",
            subjects.len()
        );
    }
}

/// Applies a rescaled multiplier to a subject baseline.
///
/// `multiplier` is relative to the model scale `kappa`; it is converted to
/// the norm the baseline actually attained and clamped to `[-1, 1]`.
pub(crate) fn apply_baseline(baseline: &Baseline, multiplier: f64, kappa: f64, grid_size: usize) -> Result<TransportMap> {
    match baseline {
        Baseline::Positive(r) => scalar_mult((multiplier * kappa / r.norm).clamp(-1.0, 1.0), &r.map),
        Baseline::Negative(r) => scalar_mult((-multiplier * kappa / r.norm).clamp(-1.0, 1.0), &r.map),
        Baseline::Identity => Ok(TransportMap::identity(grid_size)),
    }
}

/// Predicted transport of subject `id` at time `t`.
pub fn predict_dense(model: &FittedDenseModel, id: &str, t: f64) -> Result<TransportMap> {
    let u = model.multiplier(id, t)?;
    let s = model.subject(id)?;
    let m = match &s.baseline {
        Baseline::Positive(r) | Baseline::Negative(r) => r.map.grid_size(),
        Baseline::Identity => 2,
    };
    apply_baseline(&s.baseline, u, model.kappa, m)
}
