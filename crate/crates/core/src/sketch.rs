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

//! The count-min counter table, its classical estimators, merge and file format.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::hashing::{fingerprint, make_hash_family, HashFamily, TokenFingerprint};

pub const MAGIC: [u8; 4] = *b"CMSN";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 * 4;

/// The counters c_{n,h_n(v)} of one token, one per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketVector {
    pub values: Vec<u64>,
}

impl BucketVector {
    pub fn new(values: Vec<u64>) -> Self {
        BucketVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> u64 {
        self.values.iter().copied().min().unwrap_or(0)
    }
}

/// N × J table of 64-bit counters plus the stream length m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sketch {
    family: HashFamily,
    counts: Vec<u64>,
    total: u64,
}

pub fn new_sketch(seed: u64, depth: usize, width: usize) -> Result<Sketch> {
    Sketch::new(seed, depth, width)
}

impl Sketch {
    pub fn new(seed: u64, depth: usize, width: usize) -> Result<Self> {
        let family = make_hash_family(seed, depth, width)?;
        let cells = depth
            .checked_mul(width)
            .ok_or_else(|| Error::invalid(format!("sketch dimensions {depth} x {width} overflow")))?;
        Ok(Sketch { family, counts: vec![0; cells], total: 0 })
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.family.seed()
    }

    pub fn depth(&self) -> usize {
        self.family.depth()
    }

    pub fn width(&self) -> usize {
        self.family.width()
    }

    /// Number of tokens ingested.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row(&self, n: usize) -> &[u64] {
        let w = self.width();
        &self.counts[n * w..(n + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.width())
    }

    pub fn update(&mut self, token: &[u8]) -> Result<()> {
        self.update_fingerprint(fingerprint(token)?)
    }

    pub fn update_fingerprint(&mut self, fp: TokenFingerprint) -> Result<()> {
        // Every counter is bounded by the total, so checking the total suffices.
        self.total = self.total.checked_add(1).ok_or(Error::CounterOverflow)?;
        let w = self.width();
        for n in 0..self.depth() {
            let j = self.family.bucket(n, fp);
            self.counts[n * w + j] += 1;
        }
        Ok(())
    }

    pub fn bucket_vector(&self, token: &[u8]) -> Result<BucketVector> {
        Ok(self.bucket_vector_fingerprint(fingerprint(token)?))
    }

    pub fn bucket_vector_fingerprint(&self, fp: TokenFingerprint) -> BucketVector {
        let w = self.width();
        let values = (0..self.depth()).map(|n| self.counts[n * w + self.family.bucket(n, fp)]).collect();
        BucketVector { values }
    }

    pub fn merge(&self, other: &Sketch) -> Result<Sketch> {
        if self.family != other.family {
            return Err(Error::FamilyMismatch(format!(
                "(seed {}, {} x {}) vs (seed {}, {} x {})",
                self.seed(),
                self.depth(),
                self.width(),
                other.seed(),
                other.depth(),
                other.width()
            )));
        }
        let total = self.total.checked_add(other.total).ok_or(Error::CounterOverflow)?;
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Ok(Sketch { family: self.family.clone(), counts, total })
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.counts.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for field in [self.seed(), self.depth() as u64, self.width() as u64, self.total] {
            out.extend_from_slice(&field.to_le_bytes());
        }
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Sketch> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated { expected: HEADER_LEN, actual: bytes.len() }.into());
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic).into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let word = |i: usize| u64::from_le_bytes(bytes[6 + 8 * i..14 + 8 * i].try_into().expect("length checked"));
        let (seed, depth, width, total) = (word(0), word(1), word(2), word(3));
        if depth == 0 || width == 0 {
            return Err(FormatError::Inconsistent(format!("zero dimension {depth} x {width}")).into());
        }
        let cells = depth
            .checked_mul(width)
            .and_then(|c| usize::try_from(c).ok())
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| FormatError::Inconsistent(format!("dimensions {depth} x {width} too large")))?;
        let expected = HEADER_LEN + 8 * cells;
        if bytes.len() < expected {
            return Err(FormatError::Truncated { expected, actual: bytes.len() }.into());
        }
        if bytes.len() > expected {
            return Err(FormatError::TrailingBytes(bytes.len() - expected).into());
        }
        let counts: Vec<u64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut sketch = Sketch::new(seed, depth as usize, width as usize)?;
        for (n, row) in counts.chunks_exact(width as usize).enumerate() {
            let sum = row.iter().try_fold(0u64, |acc, &c| acc.checked_add(c));
            if sum != Some(total) {
                return Err(FormatError::Inconsistent(format!("row {n} does not sum to m = {total}")).into());
            }
        }
        sketch.counts = counts;
        sketch.total = total;
        Ok(sketch)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Sketch> {
        Sketch::deserialize(&std::fs::read(path)?)
    }
}

/// Row minimum.
pub fn estimate_cms(bv: &BucketVector) -> u64 {
    bv.min()
}

/// Count-mean-min: the median over rows of the noise-corrected count
/// max(0, c − (m − c)/(J − 1)), capped by the row minimum. Falls back to the
/// minimum when J = 1.
pub fn estimate_cmm(bv: &BucketVector, total: u64, width: usize) -> f64 {
    let cms = estimate_cms(bv) as f64;
    if width < 2 || bv.is_empty() {
        return cms;
    }
    let denom = (width - 1) as f64;
    let mut corrected: Vec<f64> =
        bv.values.iter().map(|&c| (c as f64 - (total - c.min(total)) as f64 / denom).max(0.0)).collect();
    corrected.sort_by(f64::total_cmp);
    let n = corrected.len();
    let median = if n % 2 == 1 { corrected[n / 2] } else { 0.5 * (corrected[n / 2 - 1] + corrected[n / 2]) };
    median.min(cms)
}
