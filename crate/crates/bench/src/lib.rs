//! Seeded synthetic inputs shared by the benchmarks.

use otfpca::covariance::CovarianceSurface;
use otfpca::GridMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quantile function of a random Beta-like shape on `grid_size` levels.
pub fn random_measure(grid_size: usize, seed: u64) -> GridMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: f64 = rng.random_range(0.5..2.0);
    GridMeasure::from_fn(grid_size, |p| p.powf(a)).expect("monotone on [0, 1]")
}

/// Per-subject `(time, value)` pairs of a smooth random process at random times.
pub fn raw_values(subjects: usize, per_subject: usize, seed: u64) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..subjects)
        .map(|_| {
            let (c0, c1): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
            (0..per_subject)
                .map(|_| {
                    let t: f64 = rng.random();
                    (t, c0 + c1 * (2.0 * std::f64::consts::PI * t).cos())
                })
                .collect()
        })
        .collect()
}

/// Smooth three-component covariance surface on `grid_size` points.
pub fn cosine_surface(grid_size: usize) -> CovarianceSurface {
    CovarianceSurface::from_fn(grid_size, |s, t| {
        (1..=3)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * k as f64;
                2.0 * (w * s).cos() * (w * t).cos() / (k * k) as f64
            })
            .sum()
    })
    .expect("symmetric by construction")
}
