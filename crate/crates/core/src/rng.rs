//! Seeded, counter-based random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Returns the generator for `(seed, stream)`. Distinct stream indices give
/// independent sequences, so path `i` of a batch is always drawn from
/// stream `i` regardless of how the batch is scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
