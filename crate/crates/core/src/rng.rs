//! Seed derivation. Every random draw in an episode comes from a ChaCha
//! stream keyed by `(seed, episode id, step, purpose)`, so replays are exact
//! regardless of scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent draw streams within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Sensor = 1,
    Actuation = 2,
    Policy = 3,
    Episode = 4,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-episode key: mixed seed XOR episode id.
pub fn episode_key(seed: u64, episode_id: u64) -> u64 {
    splitmix64(seed) ^ episode_id
}

pub fn step_rng(seed: u64, episode_id: u64, step: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(episode_key(seed, episode_id));
    rng.set_stream((step << 8) | stream as u64);
    rng
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
