//! Deterministic seed derivation: all randomness flows from one top-level
//! seed through named sub-streams, so partial re-runs reproduce exactly and
//! results are stable across platforms and thread schedules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(FNV_PRIME);
    }
}

/// Derive a child seed from `(seed, label, indices)` with a stable hash.
pub fn derive(seed: u64, label: &str, indices: &[u64]) -> u64 {
    let mut hash = FNV_OFFSET;
    fnv1a(&mut hash, &seed.to_le_bytes());
    fnv1a(&mut hash, label.as_bytes());
    for &idx in indices {
        fnv1a(&mut hash, &idx.to_le_bytes());
    }
    hash
}

/// Stable 64-bit hash of a string, for keying streams by opaque ids.
pub fn hash_str(text: &str) -> u64 {
    let mut hash = FNV_OFFSET;
    fnv1a(&mut hash, text.as_bytes());
    hash
}

/// Seeded RNG for a named sub-stream.
pub fn rng(seed: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label, indices))
}

/// Sub-stream keyed by an agent id (and any further indices).
pub fn agent_rng(seed: u64, label: &str, agent_id: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut parts = vec![hash_str(agent_id)];
    parts.extend_from_slice(indices);
    rng(seed, label, &parts)
}
