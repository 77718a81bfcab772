//! Seed derivation for named, independent random streams.
//!
//! Every stochastic concern (batch order, frame sampling, pairing, EQL
//! masks, ...) draws from its own stream derived from the global seed, a
//! string tag, and an epoch index. Streams are re-derived rather than
//! checkpointed: resuming at an epoch boundary reproduces the unbroken
//! run exactly, and toggling one feature never perturbs another's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice. Stable across platforms and releases, unlike
/// the std hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv1a_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derive a child seed from (global seed, tag, index).
pub fn derive_seed(global: u64, tag: &str, index: u64) -> u64 {
    let h = fnv1a_extend(FNV_OFFSET, &global.to_le_bytes());
    let h = fnv1a_extend(h, tag.as_bytes());
    fnv1a_extend(h, &index.to_le_bytes())
}

/// Seeded generator for one named stream at one epoch.
pub fn stream(global: u64, tag: &str, epoch: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global, tag, epoch))
}

/// Per-video seed; depends only on the dataset seed and the video id, so
/// generation order and worker count are irrelevant.
pub fn video_seed(global: u64, video_id: &str) -> u64 {
    derive_seed(global, video_id, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: these must never change, or stored datasets and
        // recorded runs stop being reproducible.
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(derive_seed(7, "sampler", 0), derive_seed(7, "sampler", 0));
    }

    #[test]
    fn streams_are_distinct() {
        assert_ne!(derive_seed(7, "sampler", 0), derive_seed(7, "sampler", 1));
        assert_ne!(derive_seed(7, "sampler", 0), derive_seed(7, "aug", 0));
        assert_ne!(derive_seed(7, "sampler", 0), derive_seed(8, "sampler", 0));
        assert_ne!(video_seed(7, "v0001"), video_seed(7, "v0002"));
    }
}
