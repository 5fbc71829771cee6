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

//! Sequential partition samplers. After i tokens in k blocks of sizes n_1..n_k,
//! the NGGP opens a new block with probability V_{i+1,k+1}/V_{i,k} and joins
//! block j with probability (V_{i+1,k}/V_{i,k})(n_j − σ); the DP opens a new
//! block with probability β/(β+i) and joins block j with probability n_j/(β+i).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::posterior::partition::{PartitionStats, VTable};

/// Allowed deviation of the NGGP step probabilities from a total of one.
pub const PREDICTIVE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct NggpSampler {
    table: VTable,
    sizes: Vec<u64>,
    token_blocks: Vec<u32>,
    rng: ChaCha8Rng,
}

impl NggpSampler {
    pub fn new(alpha: f64, sigma: f64, seed: u64) -> Result<Self> {
        Ok(Self::with_table(VTable::new(alpha, sigma)?, seed))
    }

    /// Reuses memoized V weights, e.g. across seeds.
    pub fn with_table(table: VTable, seed: u64) -> Self {
        NggpSampler { table, sizes: Vec::new(), token_blocks: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn into_table(self) -> VTable {
        self.table
    }

    /// Number of tokens drawn so far.
    pub fn tokens(&self) -> u64 {
        self.token_blocks.len() as u64
    }

    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Draws the next token and returns the index of its block.
    pub fn advance(&mut self) -> Result<usize> {
        let i = self.tokens();
        let k = self.sizes.len() as u64;
        let opens = if i == 0 {
            true
        } else {
            let base = self.table.log_v(i, k)?;
            let p_new = (self.table.log_v(i + 1, k + 1)? - base).exp();
            let per_unit = (self.table.log_v(i + 1, k)? - base).exp();
            let total = p_new + per_unit * (i as f64 - k as f64 * self.table.sigma());
            if !((total - 1.0).abs() <= PREDICTIVE_TOLERANCE) {
                return Err(Error::InconsistentPredictive { step: i, total });
            }
            self.rng.random::<f64>() * total < p_new
        };
        let block = if opens {
            self.sizes.push(0);
            self.sizes.len() - 1
        } else {
            self.pick_existing()
        };
        self.sizes[block] += 1;
        self.token_blocks.push(block as u32);
        Ok(block)
    }

    /// Block j with probability ∝ n_j − σ: a uniformly chosen token's block is
    /// proposed with probability ∝ n_j and kept with probability (n_j − σ)/n_j.
    fn pick_existing(&mut self) -> usize {
        let sigma = self.table.sigma();
        loop {
            let t = self.rng.random_range(0..self.token_blocks.len());
            let block = self.token_blocks[t] as usize;
            let n = self.sizes[block] as f64;
            if self.rng.random::<f64>() * n < n - sigma {
                return block;
            }
        }
    }

    pub fn stats(&self) -> PartitionStats {
        PartitionStats::from_block_sizes(&self.sizes)
    }
}

#[derive(Debug, Clone)]
pub struct DpSampler {
    beta: f64,
    sizes: Vec<u64>,
    token_blocks: Vec<u32>,
    rng: ChaCha8Rng,
}

impl DpSampler {
    pub fn new(beta: f64, seed: u64) -> Result<Self> {
        if !(beta > 0.0) || beta.is_infinite() {
            return Err(Error::invalid(format!("dp mass must be finite and positive, got {beta}")));
        }
        Ok(DpSampler { beta, sizes: Vec::new(), token_blocks: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn tokens(&self) -> u64 {
        self.token_blocks.len() as u64
    }

    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn advance(&mut self) -> usize {
        let i = self.token_blocks.len() as f64;
        let block = if self.rng.random::<f64>() * (self.beta + i) < self.beta {
            self.sizes.push(0);
            self.sizes.len() - 1
        } else {
            self.token_blocks[self.rng.random_range(0..self.token_blocks.len())] as usize
        };
        self.sizes[block] += 1;
        self.token_blocks.push(block as u32);
        block
    }

    pub fn stats(&self) -> PartitionStats {
        PartitionStats::from_block_sizes(&self.sizes)
    }
}

/// Partition of m NGGP draws; the second value lists block sizes in order of appearance.
pub fn nggp_sample_partition(m: u64, alpha: f64, sigma: f64, seed: u64) -> Result<(PartitionStats, Vec<u64>)> {
    let mut table = VTable::new(alpha, sigma)?;
    nggp_sample_partition_with(&mut table, m, seed)
}

/// As [`nggp_sample_partition`], reading and extending a shared V table.
pub fn nggp_sample_partition_with(table: &mut VTable, m: u64, seed: u64) -> Result<(PartitionStats, Vec<u64>)> {
    let fresh = VTable::new(table.alpha(), table.sigma())?;
    let mut sampler = NggpSampler::with_table(std::mem::replace(table, fresh), seed);
    let outcome = (0..m).try_for_each(|_| sampler.advance().map(drop));
    let stats = sampler.stats();
    let sizes = sampler.block_sizes().to_vec();
    *table = sampler.into_table();
    outcome.map(|()| (stats, sizes))
}

pub fn dp_sample_partition(m: u64, beta: f64, seed: u64) -> Result<(PartitionStats, Vec<u64>)> {
    let mut sampler = DpSampler::new(beta, seed)?;
    for _ in 0..m {
        sampler.advance();
    }
    Ok((sampler.stats(), sampler.block_sizes().to_vec()))
}
