use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;

/// The crate's deterministic generator.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero-mean normal samples with standard deviation `std`.
pub fn normal_tensor(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let dist = Normal::new(0.0, std).expect("std must be finite and non-negative");
    let values = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape.to_vec(), values).expect("extents must be positive")
}
