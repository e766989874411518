//! Transport-process model for sparsely observed subjects, with a Gaussian
//! latent process recovered by best linear prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{raw_scores, smooth_covariance, CovarianceSurface};
use crate::dense::{apply_baseline, Baseline, SubjectFit, DEGENERATE_NORM};
use crate::eigen::{eigendecompose, EigenSystem};
use crate::error::{Error, Result};
use crate::frechet::{default_bandwidth, mean_transport, Panel};
use crate::kernel::Kernel;
use crate::link::Link;
use crate::scores::{pace_scores, DEFAULT_RIDGE};
use crate::transport::{norm1, sign, TransportMap};

/// Settings of the sparse fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseConfig {
    /// Common baseline norm; the norm of the pooled non-negative-sign mean
    /// transport when absent.
    pub norm_t0: Option<f64>,
    pub link: Link,
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    pub time_grid: usize,
    pub ncomp: Option<usize>,
    pub variance_fraction: f64,
    pub max_components: usize,
    pub ridge: f64,
}

impl Default for SparseConfig {
    fn default() -> Self {
        Self {
            norm_t0: None,
            link: Link::Arctan,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            time_grid: 51,
            ncomp: None,
            variance_fraction: 0.95,
            max_components: 20,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Output of [`fit_sparse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSparseModel {
    pub norm_t0: f64,
    pub link: Link,
    /// Smoothed covariance of the latent process.
    pub surface: CovarianceSurface,
    pub eig: EigenSystem,
    pub ncomp: usize,
    pub subjects: Vec<SubjectFit>,
    /// Per-subject norm of the non-negative-sign mean transport (diagnostic).
    pub empirical_norms: Vec<f64>,
    pub config: SparseConfig,
}

impl FittedSparseModel {
    /// Assembles a model from externally supplied components.
    pub fn from_components(
        norm_t0: f64,
        link: Link,
        surface: CovarianceSurface,
        eig: EigenSystem,
        ncomp: usize,
        subjects: Vec<SubjectFit>,
    ) -> Result<Self> {
        if !(norm_t0 > 0.0) {
            return Err(Error::param("norm_t0", format!("must be positive, got {norm_t0}")));
        }
        if ncomp == 0 || ncomp > eig.count() {
            return Err(Error::param("ncomp", format!("must lie in 1..={}, got {ncomp}", eig.count())));
        }
        Ok(Self {
            norm_t0,
            link,
            surface,
            eig,
            ncomp,
            empirical_norms: Vec::new(),
            subjects,
            config: SparseConfig {
                norm_t0: Some(norm_t0),
                link,
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

    /// Truncated reconstruction of the latent process at `t`.
    pub fn latent(&self, id: &str, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, 1]")));
        }
        let s = self.subject(id)?;
        Ok((0..self.ncomp).map(|l| s.scores[l] * self.eig.eval(l, t)).sum())
    }
}

/// Norm of the mean of all non-negative-sign transports in the panel.
pub fn pooled_positive_norm(panel: &Panel<TransportMap>) -> Result<f64> {
    let pos: Vec<&TransportMap> = panel
        .subjects()
        .iter()
        .flat_map(|s| s.observations.iter().map(|o| &o.value))
        .filter(|t| sign(t) >= 0)
        .collect();
    if pos.is_empty() {
        return Ok(0.0);
    }
    Ok(norm1(&mean_transport(pos)?))
}

/// Fits the sparse transport-process model to a centered panel.
pub fn fit_sparse(panel: &Panel<TransportMap>, config: &SparseConfig) -> Result<FittedSparseModel> {
    let norm_t0 = match config.norm_t0 {
        Some(v) if !(v > 0.0) => return Err(Error::param("norm_t0", format!("must be positive, got {v}"))),
        Some(v) => v,
        None => {
            let v = pooled_positive_norm(panel)?;
            if v > DEGENERATE_NORM {
                v
            } else {
                log::warn!("pooled transports carry no mass; using baseline norm 1");
                1.0
            }
        }
    };
    let h = config
        .bandwidth
        .unwrap_or_else(|| default_bandwidth(panel.len(), panel.mean_observations()));
    let raw: Vec<Vec<(f64, f64)>> = panel
        .subjects()
        .iter()
        .map(|s| {
            Ok(raw_scores(&s.observations, norm_t0, config.link, norm_t0)?
                .into_iter()
                .map(|r| (r.t, r.z))
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
    let fits = panel
        .subjects()
        .par_iter()
        .zip(raw.par_iter())
        .map(|(s, r)| {
            let scores = pace_scores(r, &eig, &surface, ncomp, config.ridge)?;
            let maps: Vec<&TransportMap> = s.observations.iter().map(|o| &o.value).collect();
            let fit = SubjectFit::from_transports(s.id.clone(), scores, &maps, norm_t0)?;
            let empirical = crate::dense::estimate_baselines(&maps).map(|b| norm1(&b.plus))?;
            Ok((fit, empirical))
        })
        .collect::<Result<Vec<_>>>()?;
    let (subjects, empirical_norms): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    crate::dense::report_capped(&subjects, norm_t0);
    Ok(FittedSparseModel {
        norm_t0,
        link: config.link,
        surface,
        eig,
        ncomp,
        subjects,
        empirical_norms,
        config: SparseConfig {
            norm_t0: Some(norm_t0),
            bandwidth: Some(h),
            ..config.clone()
        },
    })
}

/// Predicted transport of subject `id` at time `t`.
pub fn predict_sparse(model: &FittedSparseModel, id: &str, t: f64) -> Result<TransportMap> {
    let z = model.latent(id, t)?;
    let s = model.subject(id)?;
    let m = match &s.baseline {
        Baseline::Positive(r) | Baseline::Negative(r) => r.map.grid_size(),
        Baseline::Identity => 2,
    };
    apply_baseline(&s.baseline, model.link.forward(z), model.norm_t0, m)
}
