//! Deterministic random streams derived from opaque seed bytes.

use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use sha2::{Digest, Sha256};

/// Derives a ChaCha20 stream from a domain label and arbitrary seed bytes.
///
/// Distinct domains give independent streams for the same seed, so a single
/// experiment seed can drive the key, the sensing matrix and the signal.
pub fn seeded_rng(domain: &str, seed: &[u8]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain.as_bytes());
    h.update(seed);
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Seed bytes for an integer experiment seed.
pub fn seed_bytes(seed: u64) -> [u8; 8] {
    seed.to_be_bytes()
}
