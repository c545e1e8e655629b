//! Seeded random streams.
//!
//! All randomized operations take an explicit generator. The generator is
//! ChaCha8 ([`rand_chacha::ChaCha8Rng`]), a counter-based stream cipher: a
//! 64-bit seed selects the key and a 64-bit stream id selects one of 2^64
//! independent keystreams. Work that runs in parallel draws from distinct
//! stream ids, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for substream `stream_id` of `seed`.
pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives a child seed from a master seed and an index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(1, 3).random()).collect();
        let mut r = stream(1, 3);
        let b: Vec<u64> = (0..4).map(|_| r.random()).collect();
        let mut r2 = stream(1, 3);
        let c: Vec<u64> = (0..4).map(|_| r2.random()).collect();
        assert_eq!(b, c);
        // fresh generator per draw repeats the first value
        assert!(a.iter().all(|&v| v == a[0]));
        let mut other = stream(1, 4);
        assert_ne!(other.random::<u64>(), b[0]);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
    }
}
