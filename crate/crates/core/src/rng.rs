//! Seeded random streams. Each `(seed, stream)` pair names an independent
//! ChaCha8 keystream, so ensemble members can be sampled in any order or
//! concurrently with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
