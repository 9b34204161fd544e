//! Keyed random streams.
//!
//! Every stochastic step draws from a ChaCha stream derived from the user seed and
//! a key naming the record or partition, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// A key part fed into stream derivation.
pub enum Part<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for Part<'a> {
    fn from(s: &'a str) -> Self {
        Part::Str(s)
    }
}

impl<'a> From<&'a String> for Part<'a> {
    fn from(s: &'a String) -> Self {
        Part::Str(s)
    }
}

impl From<u64> for Part<'_> {
    fn from(v: u64) -> Self {
        Part::Int(v)
    }
}

impl From<usize> for Part<'_> {
    fn from(v: usize) -> Self {
        Part::Int(v as u64)
    }
}

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// 64-bit key for `(seed, parts...)`; parts are tagged and length-prefixed.
pub fn derive_key(seed: u64, parts: &[Part<'_>]) -> u64 {
    let mut h = fnv(FNV_OFFSET, &seed.to_le_bytes());
    for p in parts {
        match p {
            Part::Str(s) => {
                h = fnv(h, &[0x53]);
                h = fnv(h, &(s.len() as u64).to_le_bytes());
                h = fnv(h, s.as_bytes());
            }
            Part::Int(v) => {
                h = fnv(h, &[0x49]);
                h = fnv(h, &v.to_le_bytes());
            }
        }
    }
    h
}

pub fn stream(seed: u64, parts: &[Part<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, parts))
}
