//! Seed derivation. Every random stream in the crate is a [`ChaCha8Rng`]
//! keyed by a 64-bit seed derived from the session seed and a stream label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GameRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed for `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(stream as u64)) ^ index)
}

pub fn rng_for(seed: u64, stream: Stream, index: u64) -> GameRng {
    GameRng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Labels for the independent random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Schedule = 1,
    RoundWorld = 2,
    AgentPolicy = 3,
    AgentLatency = 4,
    BatteryAgent = 5,
    KMeansRestart = 6,
    Bootstrap = 7,
    EigenStart = 8,
}
