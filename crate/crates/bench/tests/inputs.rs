//! The benchmark inputs are deterministic and well formed.

use otfpca::eigen::eigendecompose;
use otfpca_bench::{cosine_surface, random_measure, raw_values};

#[test]
fn inputs_are_reproducible() {
    assert_eq!(random_measure(101, 4).qvals(), random_measure(101, 4).qvals());
    assert_eq!(raw_values(5, 3, 8), raw_values(5, 3, 8));
}

#[test]
fn raw_values_have_requested_shape() {
    let v = raw_values(7, 4, 1);
    assert_eq!(v.len(), 7);
    assert!(v.iter().all(|s| s.len() == 4 && s.iter().all(|&(t, _)| (0.0..1.0).contains(&t))));
}

#[test]
fn cosine_surface_has_three_positive_eigenvalues() {
    let eig = eigendecompose(&cosine_surface(101), 4).unwrap();
    // eigenvalues of 2 cos(wks) cos(wkt) / k^2 under the L2 inner product are 1 / k^2
    for (k, &lambda) in eig.eigenvalues.iter().take(3).enumerate() {
        let expected = 1.0 / ((k + 1) * (k + 1)) as f64;
        assert!((lambda - expected).abs() < 1e-3, "{lambda} vs {expected}");
    }
    assert!(eig.eigenvalues.get(3).is_none_or(|l| l.abs() < 1e-6));
}
