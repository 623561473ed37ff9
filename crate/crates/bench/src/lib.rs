//! Fixtures shared by the benchmarks.

use cosrec::data::cyclic_patterns;
use cosrec::{CosRecConfig, CosRecModel, Dataset, Tensor, TrainWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `[batch, channels, side, side]` activations.
pub fn activations(batch: usize, channels: usize, side: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn([batch, channels, side, side], |_| rng.random_range(-1.0..1.0))
}

/// Model with default layer widths over `num_items` items.
pub fn model(num_users: usize, num_items: usize, dim: usize) -> CosRecModel<f32> {
    CosRecModel::new(CosRecConfig::new(num_users, num_items, dim), 0).expect("valid default config")
}

/// A batch of random windows with `N * T` negatives each, disjoint from the targets.
pub fn batch(size: usize, num_users: usize, num_items: usize, seed: u64) -> (Vec<TrainWindow>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (num_items / 2) as u32;
    let windows = (0..size)
        .map(|_| TrainWindow {
            user: rng.random_range(0..num_users as u32),
            input: (0..5).map(|_| rng.random_range(1..=num_items as u32)).collect(),
            targets: (0..3).map(|_| rng.random_range(1..=half)).collect(),
        })
        .collect();
    let negatives = (0..size * 9).map(|_| rng.random_range(half + 1..=num_items as u32)).collect();
    (windows, negatives)
}

pub fn toy_dataset() -> Dataset {
    cyclic_patterns(2000, 500, 10)
}
