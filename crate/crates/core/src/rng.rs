//! Seed derivation.
//!
//! Every packet, grid cell and flood round gets its own generator derived from
//! `(base_seed, index)`, so results do not depend on evaluation order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Mixes a base seed and a stream index into a new 64-bit seed (SplitMix64
/// finalizer applied twice).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = mix(base ^ 0x9e37_79b9_7f4a_7c15);
    z = mix(z.wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9)));
    z
}

/// Generator for stream `index` under `base`.
pub fn stream_rng(base: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, index))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_repeatable() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        let a: u64 = stream_rng(7, 3).random();
        let b: u64 = stream_rng(7, 3).random();
        assert_eq!(a, b);
    }
}
