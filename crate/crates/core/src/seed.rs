//! Counter-based seed derivation.
//!
//! A replication seed depends only on the master seed and the replication's coordinates, never on
//! the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `master` with an index path, e.g. `derive(master, &[t, replication])`.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(1))))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_path_sensitive() {
        let a = derive(7, &[1, 2]);
        assert_eq!(a, derive(7, &[1, 2]));
        assert_ne!(a, derive(7, &[2, 1]));
        assert_ne!(a, derive(8, &[1, 2]));
        assert_ne!(derive(7, &[0]), derive(7, &[]));
    }
}
