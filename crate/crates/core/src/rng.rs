//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 generator derived from the
//! user seed and a fixed stream id, so changing one component (say, the
//! holdout split) never perturbs the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INFERENCE_STREAM: u64 = 0;
pub const SPLIT_STREAM: u64 = 1;
pub const SYNTHETIC_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
