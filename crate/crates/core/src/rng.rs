//! Seeded random streams. Every consumer derives its own stream from the
//! run seed and a fixed tag, so adding draws in one place never shifts the
//! numbers another place sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, tag: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}
