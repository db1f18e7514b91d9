//! Named sub-stream seed derivation.
//!
//! All randomness in a run flows from one master seed. Every consumer
//! (masking, per-buffer SGD, per-step annealing, per-fold splits) draws its
//! own seed from the master via a stable hash of `(master, stream, index)`,
//! so adding or reordering one consumer never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed for the named sub-stream.
pub fn derive(master: u64, stream: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// A seeded RNG for the named sub-stream.
pub fn rng(master: u64, stream: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, index))
}
