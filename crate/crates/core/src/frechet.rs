//! Panels of distribution-valued observations, Fréchet means in the
//! Wasserstein and transport spaces, and centering of a panel into transport
//! processes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::kernel::Kernel;
use crate::measure::{transport_to_measure, GridMeasure};
use crate::transport::{optimal_transport, TransportMap};

/// Sampling design of the observation times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Every subject is observed at the same times.
    Fixed,
    /// Subject-specific (e.g. uniformly drawn) times.
    Random,
}

/// Raw payload of one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Samples(Vec<f64>),
    Measure(GridMeasure),
    Transport(TransportMap),
}

impl Payload {
    /// Quantile representation on `grid_size` levels.
    pub fn to_measure(&self, grid_size: usize) -> Result<GridMeasure> {
        let m = match self {
            Payload::Samples(xs) => return GridMeasure::empirical(xs, grid_size),
            Payload::Measure(m) => m.clone(),
            Payload::Transport(t) => transport_to_measure(t),
        };
        if m.grid_size() != grid_size {
            return Err(Error::IncompatibleGrid(m.grid_size(), grid_size));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<P> {
    pub t: f64,
    pub value: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject<P> {
    pub id: String,
    pub observations: Vec<Observation<P>>,
}

impl<P> Subject<P> {
    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.t).collect()
    }
}

/// Per-subject sequences of `(time, payload)` with times in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel<P> {
    subjects: Vec<Subject<P>>,
    design: Design,
}

impl<P> Panel<P> {
    /// Validates times (inside `[0, 1]`, distinct within a subject) and sorts
    /// each subject's observations by time.
    pub fn new(mut subjects: Vec<Subject<P>>, design: Design) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidInput("panel has no subjects".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in subjects.iter_mut() {
            if !seen.insert(s.id.clone()) {
                return Err(Error::InvalidInput(format!("duplicate subject id `{}`", s.id)));
            }
            if s.observations.is_empty() {
                return Err(Error::InvalidInput(format!("subject `{}` has no observations", s.id)));
            }
            if let Some(o) = s.observations.iter().find(|o| !(0.0..=1.0).contains(&o.t)) {
                return Err(Error::Domain(format!("time {} of subject `{}` outside [0, 1]", o.t, s.id)));
            }
            s.observations.sort_by(|a, b| a.t.total_cmp(&b.t));
            if s.observations.windows(2).any(|w| w[0].t == w[1].t) {
                return Err(Error::InvalidInput(format!("subject `{}` has repeated observation times", s.id)));
            }
        }
        Ok(Self { subjects, design })
    }

    pub fn subjects(&self) -> &[Subject<P>] {
        &self.subjects
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject(&self, id: &str) -> Option<&Subject<P>> {
        self.subjects.iter().find(|s| s.id == id)
    }

    /// Average number of observations per subject.
    pub fn mean_observations(&self) -> f64 {
        let total: usize = self.subjects.iter().map(|s| s.observations.len()).sum();
        total as f64 / self.subjects.len() as f64
    }

    /// Applies `f` to every payload, keeping times, ids and design.
    pub fn try_map<Q>(&self, f: impl Fn(&P) -> Result<Q> + Sync) -> Result<Panel<Q>>
    where
        P: Sync,
        Q: Send,
    {
        let subjects = self
            .subjects
            .par_iter()
            .map(|s| {
                let observations = s
                    .observations
                    .iter()
                    .map(|o| Ok(Observation { t: o.t, value: f(&o.value)? }))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Subject {
                    id: s.id.clone(),
                    observations,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Panel {
            subjects,
            design: self.design,
        })
    }
}

/// Default smoothing bandwidth `(n * Nbar^2)^(-1/6)`.
pub fn default_bandwidth(n_subjects: usize, mean_obs: f64) -> f64 {
    (n_subjects as f64 * mean_obs * mean_obs).powf(-1.0 / 6.0)
}

/// Wasserstein barycenter of measures: the pointwise mean of quantile functions.
pub fn cross_sectional_mean<'a>(measures: impl IntoIterator<Item = &'a GridMeasure>) -> Result<GridMeasure> {
    let mut iter = measures.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("cannot average an empty list of measures".into()))?;
    let mut acc = first.qvals().to_vec();
    let mut count = 1usize;
    let mut all_equal = true;
    for m in iter {
        if m.grid_size() != acc.len() {
            return Err(Error::IncompatibleGrid(acc.len(), m.grid_size()));
        }
        all_equal &= m == first;
        acc.iter_mut().zip(m.qvals()).for_each(|(a, q)| *a += q);
        count += 1;
    }
    if all_equal {
        return Ok(first.clone());
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(GridMeasure::from_sorted(acc))
}

/// Fréchet mean in the transport space: the pointwise mean of maps.
pub fn mean_transport<'a>(maps: impl IntoIterator<Item = &'a TransportMap>) -> Result<TransportMap> {
    let mut iter = maps.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("cannot average an empty list of transports".into()))?;
    let mut acc = first.tvals().to_vec();
    let mut count = 1usize;
    for t in iter {
        if t.grid_size() != acc.len() {
            return Err(Error::IncompatibleGrid(acc.len(), t.grid_size()));
        }
        acc.iter_mut().zip(t.tvals()).for_each(|(a, v)| *a += v);
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(TransportMap::from_monotone(acc))
}

/// Local-linear Fréchet regression weights at time `t`.
///
/// `times[i]` holds subject `i`'s observation times. The returned weights
/// already include the `1 / (n N_i)` subject normalization, so they sum to one
/// and have zero first moment about `t`.
pub fn local_linear_weights(times: &[Vec<f64>], t: f64, h: f64, kernel: Kernel) -> Result<Vec<Vec<f64>>> {
    if !(h > 0.0) {
        return Err(Error::param("bandwidth", format!("must be positive, got {h}")));
    }
    let n = times.len() as f64;
    let mut kappa = [0.0f64; 3];
    let mut support: Vec<f64> = Vec::new();
    for ts in times {
        let scale = 1.0 / (n * ts.len() as f64);
        for &tij in ts {
            let d = tij - t;
            let k = kernel.scaled(d, h);
            if k > 0.0 {
                support.push(tij);
                kappa[0] += scale * k;
                kappa[1] += scale * k * d;
                kappa[2] += scale * k * d * d;
            }
        }
    }
    support.sort_by(f64::total_cmp);
    support.dedup();
    if support.len() < 2 {
        return Err(Error::InsufficientData {
            lo: t - h,
            hi: t + h,
            found: support.len(),
            needed: 2,
        });
    }
    let sigma0_sq = kappa[0] * kappa[2] - kappa[1] * kappa[1];
    if !(sigma0_sq > 1e-14 * kappa[0] * kappa[2]) {
        return Err(Error::DegenerateWindow { t, sigma0_sq });
    }
    Ok(times
        .iter()
        .map(|ts| {
            let scale = 1.0 / (n * ts.len() as f64);
            ts.iter()
                .map(|&tij| {
                    let d = tij - t;
                    scale * kernel.scaled(d, h) * (kappa[2] - kappa[1] * d) / sigma0_sq
                })
                .collect()
        })
        .collect())
}

/// Local Fréchet regression of the measures in `panel` at time `t`.
///
/// Negative local-linear weights can produce a non-monotone quantile average;
/// the result is projected back by isotonic regression and clamped to `[0, 1]`.
pub fn local_frechet_mean(panel: &Panel<GridMeasure>, t: f64, h: f64, kernel: Kernel) -> Result<GridMeasure> {
    let times: Vec<Vec<f64>> = panel.subjects().iter().map(Subject::times).collect();
    let weights = local_linear_weights(&times, t, h, kernel)?;
    let m = panel.subjects()[0].observations[0].value.grid_size();
    let mut acc = vec![0.0; m];
    for (s, ws) in panel.subjects().iter().zip(&weights) {
        for (o, &w) in s.observations.iter().zip(ws) {
            if w == 0.0 {
                continue;
            }
            if o.value.grid_size() != m {
                return Err(Error::IncompatibleGrid(m, o.value.grid_size()));
            }
            acc.iter_mut().zip(o.value.qvals()).for_each(|(a, q)| *a += w * q);
        }
    }
    Ok(GridMeasure::from_sorted(grid::isotonic(&acc)))
}

/// Options for [`center_panel`].
#[derive(Debug, Clone)]
pub struct CenteringOptions {
    /// Quantile grid size `M`.
    pub grid_size: usize,
    /// Bandwidth for local Fréchet regression (required for random designs).
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    /// Size of the time grid on which a random-design barycenter path is cached.
    pub time_grid: usize,
    /// Known reference measure used instead of an estimated barycenter.
    pub reference: Option<GridMeasure>,
}

impl Default for CenteringOptions {
    fn default() -> Self {
        Self {
            grid_size: 101,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            time_grid: 51,
            reference: None,
        }
    }
}

/// Barycenter at a set of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterPath {
    pub times: Vec<f64>,
    pub measures: Vec<GridMeasure>,
}

impl BarycenterPath {
    /// Linear interpolation in time between neighbouring quantile functions.
    pub fn at(&self, t: f64) -> GridMeasure {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return self.measures[0].clone();
        }
        if k == self.times.len() {
            return self.measures[k - 1].clone();
        }
        if self.times[k] == t {
            return self.measures[k].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let q = self.measures[k - 1]
            .qvals()
            .iter()
            .zip(self.measures[k].qvals())
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        GridMeasure::from_sorted(q)
    }
}

/// A panel of transports from the barycenter, plus the barycenter used.
#[derive(Debug, Clone)]
pub struct CenteredPanel {
    pub transports: Panel<TransportMap>,
    pub barycenter: BarycenterPath,
}

/// Replaces each distributional observation by the optimal transport from
/// the (estimated or known) barycenter at its time.
pub fn center_panel(panel: &Panel<Payload>, opts: &CenteringOptions) -> Result<CenteredPanel> {
    let m = opts.grid_size;
    let measures = panel.try_map(|p| p.to_measure(m))?;

    let barycenter = if let Some(reference) = &opts.reference {
        if reference.grid_size() != m {
            return Err(Error::IncompatibleGrid(reference.grid_size(), m));
        }
        BarycenterPath {
            times: vec![0.0],
            measures: vec![reference.clone()],
        }
    } else {
        match panel.design() {
            Design::Fixed => fixed_barycenter(&measures)?,
            Design::Random => {
                let h = opts
                    .bandwidth
                    .ok_or_else(|| Error::Config("random designs need a bandwidth for local Fréchet regression".into()))?;
                let times = grid::nodes(opts.time_grid);
                let bary = times
                    .par_iter()
                    .map(|&t| local_frechet_mean(&measures, t, h, opts.kernel))
                    .collect::<Result<Vec<_>>>()?;
                BarycenterPath {
                    times,
                    measures: bary,
                }
            }
        }
    };

    let subjects = measures
        .subjects()
        .par_iter()
        .map(|s| {
            let observations = s
                .observations
                .iter()
                .map(|o| {
                    let mean = barycenter.at(o.t);
                    Ok(Observation {
                        t: o.t,
                        value: optimal_transport(&mean, &o.value)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Subject {
                id: s.id.clone(),
                observations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CenteredPanel {
        transports: Panel {
            subjects,
            design: panel.design(),
        },
        barycenter,
    })
}

/// Cross-sectional barycenter at each distinct observation time.
fn fixed_barycenter(measures: &Panel<GridMeasure>) -> Result<BarycenterPath> {
    let mut all: Vec<(f64, &GridMeasure)> = measures
        .subjects()
        .iter()
        .flat_map(|s| s.observations.iter().map(|o| (o.t, &o.value)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = Vec::new();
    let mut means = Vec::new();
    let mut start = 0;
    while start < all.len() {
        let t0 = all[start].0;
        let end = start + all[start..].iter().take_while(|(t, _)| (t - t0).abs() <= 1e-9).count();
        times.push(t0);
        means.push(cross_sectional_mean(all[start..end].iter().map(|(_, m)| *m))?);
        start = end;
    }
    Ok(BarycenterPath { times, measures: means })
}
