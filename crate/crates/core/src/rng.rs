//! Seeded random substreams.
//!
//! Every stochastic operation takes an explicit seed. Work item `k` draws
//! from ChaCha8 stream `k` of that seed, so results do not depend on the
//! order in which items are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SubstreamRng = ChaCha8Rng;

pub fn substream(seed: u64, stream: u64) -> SubstreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for replicate `replicate` of experiment arm `arm`.
pub fn stream_id(arm: u32, replicate: u32) -> u64 {
    (u64::from(arm) << 32) | u64::from(replicate)
}
