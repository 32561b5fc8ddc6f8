//! Deterministic derivation of per-path, per-block random streams.
//!
//! Every stream is a ChaCha8 generator whose key is a SplitMix64 hash of
//! `(master_seed, path_idx, block)`. Nothing depends on which thread runs a
//! path or in which order paths are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 256-bit key for the stream `(master_seed, path_idx, block)`.
pub fn derive_key(master_seed: u64, path_idx: u64, block: u64) -> [u8; 32] {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ splitmix64(path_idx.wrapping_add(0x5851_f42d_4c95_7f2d)));
    let c = splitmix64(b ^ splitmix64(block.wrapping_add(0x1405_7b7e_f767_814f)));
    let mut key = [0u8; 32];
    let mut w = c;
    for chunk in key.chunks_exact_mut(8) {
        w = splitmix64(w);
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

/// Generator for the stream `(master_seed, path_idx, block)`.
pub fn stream(master_seed: u64, path_idx: u64, block: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(master_seed, path_idx, block))
}
