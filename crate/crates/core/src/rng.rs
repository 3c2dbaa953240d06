//! Seeded randomness with documented substream derivation.
//!
//! Every random draw in this crate flows through ChaCha8, a counter-based
//! stream-cipher generator, seeded from a 64-bit value derived as
//!
//! ```text
//! seed64 = splitmix64(splitmix64(master ^ fnv1a64(tag)) ^ index)
//! ```
//!
//! so a `(master seed, purpose tag, index)` triple addresses a reproducible,
//! statistically independent stream. Only stable, widely documented
//! primitives are involved, so a reimplementation in another language can
//! match streams bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, 64-bit variant.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 output function (Steele, Lea & Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the generator for one purpose-tagged substream.
pub fn substream(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let seed = splitmix64(splitmix64(master ^ fnv1a64(tag.as_bytes())) ^ index);
    ChaCha8Rng::seed_from_u64(seed)
}
