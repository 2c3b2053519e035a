//! Deterministic stream derivation for all Monte Carlo work.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator
//! keyed by `(master seed, stream label, chunk index)`. Labels separate
//! logical uses (sampling, direction nets, subspaces, ...) so that adding
//! a consumer never shifts the randomness seen by another, and chunk
//! indices give fixed per-chunk substreams so results are independent of
//! any data-parallel worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable across platforms.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// splitmix64 finalizer, used to decorrelate the combined key.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, stream, chunk)`. Identical arguments always
/// produce an identical byte stream.
pub fn stream_rng(seed: u64, stream: &str, chunk: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(fnv1a(stream)) ^ mix(chunk.wrapping_mul(0xa076_1d64_78bd_642f)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Derives a child seed, for handing a whole subsystem its own stream space.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    mix(seed ^ mix(fnv1a(stream)))
}
