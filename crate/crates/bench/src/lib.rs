//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows * cols` values uniform in `[-1, 1)`.
pub fn uniform(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn uniform_f32(rows: usize, cols: usize, seed: u64) -> Vec<f32> {
    uniform(rows, cols, seed).into_iter().map(|x| x as f32).collect()
}

/// Labels `0..n_classes` cycling, so every class is populated.
pub fn cyclic_labels(n: usize, n_classes: usize) -> Vec<usize> {
    (0..n).map(|i| i % n_classes).collect()
}
