//  Copyright 2026 The nigp-cms Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

//! Token fingerprints and the Carter–Wegman hash family.
//!
//! A token is reduced to a 64-bit fingerprint with an FNV-1a fold of its bytes
//! followed by the splitmix64 finalizer. Row n maps a fingerprint x to
//! ((a_n · x + b_n) mod p) mod J with p = 2^61 − 1. The pairs (a_n, b_n) are
//! drawn from a splitmix64 counter stream started at the seed: for each row in
//! order, a_n = 1 + (next mod (p − 1)) and b_n = next mod p.

use crate::error::{Error, Result};

/// The Mersenne prime 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenFingerprint(pub u64);

/// Fingerprints a non-empty byte string.
pub fn fingerprint(token: &[u8]) -> Result<TokenFingerprint> {
    if token.is_empty() {
        return Err(Error::EmptyToken);
    }
    let mut h = FNV_OFFSET;
    for &byte in token {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    Ok(TokenFingerprint(mix64(h)))
}

/// The splitmix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// splitmix64 counter stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

#[inline]
fn reduce_mersenne(v: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let mut r = (v & p) + (v >> 61);
    r = (r & p) + (r >> 61);
    let mut r = r as u64;
    if r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

/// N rows of a 2-universal family with output range [0, J).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    seed: u64,
    width: usize,
    rows: Vec<(u64, u64)>,
}

pub fn make_hash_family(seed: u64, depth: usize, width: usize) -> Result<HashFamily> {
    if depth == 0 || width == 0 {
        return Err(Error::invalid(format!("hash family needs depth >= 1 and width >= 1, got {depth} x {width}")));
    }
    let mut stream = SplitMix64::new(seed);
    let rows = (0..depth)
        .map(|_| {
            let a = 1 + stream.next_u64() % (MERSENNE_61 - 1);
            let b = stream.next_u64() % MERSENNE_61;
            (a, b)
        })
        .collect();
    Ok(HashFamily { seed, width, rows })
}

impl HashFamily {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn prime_modulus(&self) -> u64 {
        MERSENNE_61
    }

    /// The (a_n, b_n) coefficient pairs.
    pub fn coefficients(&self) -> &[(u64, u64)] {
        &self.rows
    }

    pub fn hash_row(&self, row: usize, fp: TokenFingerprint) -> Result<usize> {
        if row >= self.rows.len() {
            return Err(Error::RowOutOfRange { row, depth: self.rows.len() });
        }
        Ok(self.bucket(row, fp))
    }

    #[inline]
    pub(crate) fn bucket(&self, row: usize, fp: TokenFingerprint) -> usize {
        let (a, b) = self.rows[row];
        let x = fp.0 % MERSENNE_61;
        let v = reduce_mersenne(a as u128 * x as u128 + b as u128);
        (v % self.width as u64) as usize
    }
}
