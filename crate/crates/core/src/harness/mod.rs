//! Synthetic data, workloads and benchmark execution.

pub mod bench;
pub mod generate;
pub mod workload;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
