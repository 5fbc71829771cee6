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

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Exact sampler for Pr[X = r] = r^{−s}/ζ(s), r ≥ 1, by Devroye's rejection
/// method. Ranks past 2^53 are returned at f64 resolution.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    s: f64,
    b: f64,
}

impl ZipfSampler {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 1.0) || s.is_infinite() {
            return Err(Error::invalid(format!("zipf exponent must exceed 1, got {s}")));
        }
        Ok(ZipfSampler { s, b: (s - 1.0).exp2() })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let am1 = self.s - 1.0;
        loop {
            let u = 1.0 - rng.random::<f64>();
            let v: f64 = rng.random();
            let x = u.powf(-1.0 / am1).floor();
            if !x.is_finite() {
                continue;
            }
            let t = (1.0 + 1.0 / x).powf(am1);
            if v * x * (t - 1.0) / (self.b - 1.0) <= t / self.b {
                return x;
            }
        }
    }
}

/// Token iterator over decimal rank strings.
#[derive(Debug, Clone)]
pub struct ZipfStream {
    sampler: ZipfSampler,
    rng: ChaCha8Rng,
    remaining: u64,
}

impl Iterator for ZipfStream {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(format!("{:.0}", self.sampler.sample(&mut self.rng)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

pub fn zipf_stream(s: f64, m: u64, seed: u64) -> Result<ZipfStream> {
    Ok(ZipfStream { sampler: ZipfSampler::new(s)?, rng: ChaCha8Rng::seed_from_u64(seed), remaining: m })
}
