//! Seed derivation.
//!
//! Every random stream in a simulation is a [`SimRng`] seeded from a 64-bit
//! value obtained by folding labels into a parent seed with the SplitMix64
//! finalizer. The derivation depends only on integer arithmetic, so sub-seeds
//! are stable across platforms and releases:
//!
//! ```text
//! derive(seed, [l0, l1, ...]) = mix(... mix(mix(seed) ^ l0) ^ l1 ...)
//! ```
//!
//! String labels are folded in through 64-bit FNV-1a.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a of a UTF-8 string.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |hash, byte| {
        (hash ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix64(seed), |acc, &label| mix64(acc ^ label))
}

/// Random stream for a labelled sub-component, e.g. `stream(master, "field", &[agent_id])`.
pub fn stream(seed: u64, tag: &str, labels: &[u64]) -> SimRng {
    let mut all = Vec::with_capacity(labels.len() + 1);
    all.push(fnv1a(tag));
    all.extend_from_slice(labels);
    SimRng::seed_from_u64(derive(seed, &all))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
