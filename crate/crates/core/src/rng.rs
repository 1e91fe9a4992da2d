//! Deterministic seed derivation and per-task random streams.
//!
//! Every unit of parallel work (a Monte Carlo replication, a bootstrap
//! replicate) owns a `ChaCha8Rng` built from a derived seed and a stream
//! index, so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

/// Random stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for replication `rep` of design `design_id` at sample size `t`.
pub fn replication_seed(base_seed: u64, design_id: u64, t: u64, rep: u64) -> u64 {
    derive_seed(&[base_seed, design_id, t, rep])
}

/// Stable 64-bit id for a design name (FNV-1a).
pub fn name_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_seeds_differ_by_component() {
        let a = replication_seed(1, 2, 1000, 0);
        assert_ne!(a, replication_seed(1, 2, 1000, 1));
        assert_ne!(a, replication_seed(1, 2, 2000, 0));
        assert_ne!(a, replication_seed(1, 3, 1000, 0));
        assert_ne!(a, replication_seed(2, 2, 1000, 0));
        assert_eq!(a, replication_seed(1, 2, 1000, 0));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut s0 = stream_rng(7, 0);
        let mut s1 = stream_rng(7, 1);
        let a: Vec<u64> = (0..4).map(|_| s0.next_u64()).collect();
        let b: Vec<u64> = (0..4).map(|_| s1.next_u64()).collect();
        assert_ne!(a, b);
        let mut again = stream_rng(7, 0);
        let c: Vec<u64> = (0..4).map(|_| again.next_u64()).collect();
        assert_eq!(a, c);
    }
}
