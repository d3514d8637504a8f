//! Seed derivation. Every random stream in the toolkit is a ChaCha8 generator
//! keyed by a 64-bit value derived from the run seed and a scope label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable 64-bit hash of a seed and a sequence of labels.
pub fn hash64(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

/// Seed for a named scope (a subcommand, a task kind, a training stage).
pub fn scoped(seed: u64, scope: &str) -> u64 {
    hash64(seed, &[scope.as_bytes()])
}

/// Per-instance seed: `hash64(global_seed, kind, index)`.
pub fn instance_seed(seed: u64, kind: &str, index: u64) -> u64 {
    hash64(seed, &[kind.as_bytes(), &index.to_le_bytes()])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of arbitrary bytes, used for fingerprints.
pub fn fingerprint(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    out.iter().map(|b| format!("{b:02x}")).collect()
}
