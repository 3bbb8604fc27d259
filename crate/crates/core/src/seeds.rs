//! Seed derivation.
//!
//! Every random stream in an experiment is derived from a single master seed
//! by hashing a stream tag and a list of counters:
//!
//! ```text
//! seed = splitmix64(fnv1a64(tag) ^ splitmix64(master ^ splitmix64(c0 ^ splitmix64(c1 ^ ...))))
//! ```
//!
//! The scheme only uses 64-bit integer arithmetic, so derived seeds are
//! identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from `seed`, a stream tag and counters.
pub fn derive(seed: u64, tag: &str, counters: &[u64]) -> u64 {
    let mut acc = splitmix64(seed);
    for &c in counters {
        acc = splitmix64(acc ^ splitmix64(c));
    }
    splitmix64(acc ^ fnv1a64(tag))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named seed streams rooted at one master seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedLedger {
    master: u64,
}

impl SeedLedger {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed(&self, tag: &str, counters: &[u64]) -> u64 {
        derive(self.master, tag, counters)
    }

    /// Subject seeds are allocated as consecutive integers from one derived
    /// base, so distinct roles can never collide.
    pub fn subject_seed(&self, index: u64) -> u64 {
        derive(self.master, "subjects", &[]).wrapping_add(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen: guards against accidental changes to the scheme.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let a = derive(42, "noise", &[1, 2]);
        assert_eq!(a, derive(42, "noise", &[1, 2]));
        assert_ne!(a, derive(42, "noise", &[2, 1]));
        assert_ne!(a, derive(42, "noisy", &[1, 2]));
        assert_ne!(a, derive(43, "noise", &[1, 2]));
    }

    #[test]
    fn subject_seeds_are_distinct() {
        let ledger = SeedLedger::new(7);
        let seeds: std::collections::HashSet<u64> = (0..100).map(|i| ledger.subject_seed(i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
