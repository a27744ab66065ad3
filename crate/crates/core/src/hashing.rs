//! Seeded digests for large join keys.

use std::fmt;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::model::AttributeValue;

pub const MAX_DIGEST_BITS: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashConfig {
    pub seed: u64,
    pub output_bits: u32,
    pub family_round: u32,
}

impl HashConfig {
    pub fn new(seed: u64, output_bits: u32) -> Result<Self> {
        if output_bits == 0 || output_bits > MAX_DIGEST_BITS {
            return Err(Error::InvalidParameter(format!(
                "digest width must be in 1..={MAX_DIGEST_BITS}, got {output_bits}"
            )));
        }
        Ok(Self {
            seed,
            output_bits,
            family_round: 0,
        })
    }

    /// A config wide enough for `m` distinct keys.
    pub fn for_keys(seed: u64, m: u64) -> Result<Self> {
        Self::new(seed, required_digest_bits(m))
    }
}

/// A truncated hash value of fixed width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest {
    value: u128,
    bits: u32,
}

impl Digest {
    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.value, width = self.bits as usize)
    }
}

/// Width that maps `m` keys into at least `m^3` buckets: `ceil(3 * log2(max(m, 2)))`.
pub fn required_digest_bits(m: u64) -> u32 {
    let m = m.max(2);
    if m <= 1 << 42 {
        let cube = (m as u128).pow(3);
        // bits needed to represent cube - 1, i.e. the smallest b with 2^b >= cube
        128 - (cube - 1).leading_zeros()
    } else {
        (3.0 * (m as f64).log2()).ceil() as u32
    }
}

pub fn digest(v: &AttributeValue, cfg: &HashConfig) -> Digest {
    let hi = xxh3_64_with_seed(v.payload(), cfg.seed);
    let lo = xxh3_64_with_seed(v.payload(), splitmix64(cfg.seed ^ 0xa076_1d64_78bd_642f));
    let full = ((hi as u128) << 64) | lo as u128;
    let bits = cfg.output_bits.clamp(1, MAX_DIGEST_BITS);
    let value = if bits == 128 { full } else { full >> (128 - bits) };
    Digest { value, bits }
}

/// Moves to the next member of the hash family.
pub fn rehash(cfg: &HashConfig) -> HashConfig {
    let round = cfg.family_round + 1;
    HashConfig {
        seed: splitmix64(cfg.seed ^ splitmix64(round as u64)),
        output_bits: cfg.output_bits,
        family_round: round,
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
