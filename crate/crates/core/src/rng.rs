//! Seeded random streams.
//!
//! Every random draw in a run flows from the single configured seed. Each
//! consumer gets its own ChaCha8 stream seeded with `mix(seed, index)`:
//! robot `i` uses index `i`, while the world generator and the broadcast
//! bus use the reserved indices [`WORLD_STREAM`] and [`BUS_STREAM`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

pub const WORLD_STREAM: u64 = u64::MAX;
pub const BUS_STREAM: u64 = u64::MAX - 1;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(seed, index)` used as the seed of stream `index`.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.rotate_left(32))
}

pub fn stream(seed: u64, index: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(mix(seed, index))
}

/// Uniform sample in `[0, 1)` from one 64-bit draw.
pub fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviate from exactly one 64-bit draw (Box-Muller on the
/// two 32-bit halves).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let bits = rng.next_u64();
    let u1 = ((bits >> 32) as f64 + 0.5) / 4_294_967_296.0;
    let u2 = ((bits & 0xFFFF_FFFF) as f64) / 4_294_967_296.0;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
