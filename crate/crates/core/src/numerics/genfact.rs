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

//! Central generalized factorial coefficients C(m, k; σ) in log form.

use super::special::log_add_exp;
use crate::error::{Error, Result};

/// Triangle of ln C(m, k; σ) for 0 ≤ k ≤ m ≤ max_m.
#[derive(Debug, Clone)]
pub struct GenFactorialTable {
    sigma: f64,
    rows: Vec<Vec<f64>>,
}

/// Fills the table with C(m+1, k) = (m − kσ) C(m, k) + σ C(m, k−1).
pub fn gen_factorial_table(sigma: f64, max_m: usize) -> Result<GenFactorialTable> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::invalid(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if max_m < 1 {
        return Err(Error::invalid("generalized factorial table needs max_m >= 1"));
    }
    let ln_sigma = sigma.ln();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_m + 1);
    rows.push(vec![0.0]);
    for m in 0..max_m {
        let prev = &rows[m];
        let mut next = vec![f64::NEG_INFINITY; m + 2];
        for (k, slot) in next.iter_mut().enumerate().skip(1) {
            let stay = if k <= m { (m as f64 - k as f64 * sigma).ln() + prev[k] } else { f64::NEG_INFINITY };
            let grow = ln_sigma + prev[k - 1];
            *slot = log_add_exp(stay, grow);
        }
        rows.push(next);
    }
    Ok(GenFactorialTable { sigma, rows })
}

impl GenFactorialTable {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn max_m(&self) -> usize {
        self.rows.len() - 1
    }

    /// ln C(m, k; σ); `-inf` outside the support.
    pub fn log_coefficient(&self, m: usize, k: usize) -> f64 {
        match self.rows.get(m) {
            Some(row) if k <= m => row[k],
            _ => f64::NEG_INFINITY,
        }
    }
}
