// SPDX-License-Identifier: Apache-2.0

//! Text vectors: the signed feature-hashing featurizer and the container
//! shared with externally computed embeddings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

pub const DEFAULT_HASH_DIM: usize = 256;
pub const DEFAULT_EMBEDDING_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    HashFeaturizer,
    ExternalEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextVector {
    pub dim: usize,
    pub values: Vec<f64>,
    pub source: TextSource,
}

impl TextVector {
    pub fn is_valid(&self) -> bool {
        self.values.len() == self.dim && self.values.iter().all(|v| v.is_finite())
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(message: &str) -> impl Iterator<Item = String> + '_ {
    message
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seeded FNV-1a over the UTF-8 bytes followed by a splitmix64 finalizer,
/// so the value is identical on every platform.
pub fn seeded_hash(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for &b in token.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signed hashing-trick vector of the message, L2-normalized.
///
/// Each token lands in bucket `h1(token) mod dim` with sign taken from an
/// independently seeded `h2`. An empty message yields the zero vector.
///
/// # Panics
///
/// If `dim < 2`.
pub fn hash_featurize(message: &str, dim: usize, seed: u64) -> TextVector {
    assert!(dim >= 2, "hash featurizer needs at least two buckets");
    let mut values = vec![0.0; dim];
    for token in tokenize(message) {
        let bucket = (seeded_hash(&token, seed) % dim as u64) as usize;
        let sign = if seeded_hash(&token, seed ^ SIGN_SALT) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        values[bucket] += sign;
    }
    let n = math::norm(&values);
    if n > 0.0 {
        values.iter_mut().for_each(|v| *v /= n);
    }
    TextVector {
        dim,
        values,
        source: TextSource::HashFeaturizer,
    }
}
