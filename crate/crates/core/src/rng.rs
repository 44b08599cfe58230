//! Seeded randomness. Every random choice in the crate flows from a
//! ChaCha8 stream keyed by `(seed, stream)`, so runs reproduce bit-for-bit
//! on any platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent generator for one phase of a run.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const GENERATE: u64 = 1;
    pub const STAGE_ONE: u64 = 2;
    pub const STAGE_TWO: u64 = 3;
    pub const CONNECT: u64 = 4;
    pub const SPECTRAL: u64 = 5;
    pub const SAMPLING: u64 = 6;
}
