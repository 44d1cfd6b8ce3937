//! Shared generators for the benchmark targets.

use rand::Rng;

/// Random nondominated front of (up to) `n` points in `m` objectives,
/// values in (0, 1).
pub fn random_front(n: usize, m: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let points: Vec<Vec<f64>> =
        (0..n).map(|_| (0..m).map(|_| rng.random_range(0.01..1.0)).collect()).collect();
    let keep = morbo::pareto_filter(&points);
    keep.into_iter().map(|i| points[i].clone()).collect()
}

/// Random points in the unit cube.
pub fn random_points(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
}
