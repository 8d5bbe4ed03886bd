//! Deterministic substreams: every parallel unit draws from a ChaCha8 stream
//! keyed by (seed, domain, indices...), so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep unrelated consumers of the same seed apart.
pub mod domain {
    pub const WINDOW_SOUP: u64 = 0x57_494e;
    pub const COVER: u64 = 0x43_4f56;
    pub const NULL_CALIBRATION: u64 = 0x4e_554c;
    pub const PERMUTATION: u64 = 0x50_4552;
    pub const EVENTS: u64 = 0x45_564e;
    pub const TEST: u64 = 0x54_4553;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a tag path into 256 bits of key material.
pub fn derive_key(seed: u64, tags: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    let mut key = [0u8; 32];
    let mut s = h;
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    key
}

pub fn substream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(seed, tags))
}

/// Seed for an independent sub-experiment.
pub fn child_seed(seed: u64, tags: &[u64]) -> u64 {
    u64::from_le_bytes(derive_key(seed, tags)[..8].try_into().expect("8 bytes"))
}

/// Tag for a signed coordinate.
pub fn coord_tag(v: i64) -> u64 {
    v as u64
}
