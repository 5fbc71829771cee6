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

//! Dirichlet process baseline.
//!
//! Under a DP with bucket mass β the frequency of the next token given a bucket
//! total c has the closed form
//!   p(ℓ; c, β) = β · c! / (c − ℓ)! · Γ(β + c − ℓ) / Γ(β + c + 1).

use crate::error::{Error, Result};
use crate::numerics::special::{ln_gamma, log_factorial};

pub fn dp_log_pmf(ell: u64, c: u64, beta: f64) -> Result<f64> {
    if ell > c {
        return Err(Error::invalid(format!("frequency {ell} exceeds bucket total {c}")));
    }
    if !(beta > 0.0) || beta.is_infinite() {
        return Err(Error::invalid(format!("mass must be finite and positive, got {beta}")));
    }
    Ok(ln_dp(ell, c, beta, ln_gamma(beta + c as f64 + 1.0)))
}

/// Unchecked term with ln Γ(β + c + 1) supplied by the caller.
#[inline]
pub(crate) fn ln_dp(ell: u64, c: u64, beta: f64, ln_gamma_top: f64) -> f64 {
    let rest = c - ell;
    beta.ln() + log_factorial(c) - log_factorial(rest) + ln_gamma(beta + rest as f64) - ln_gamma_top
}

/// ln p(ℓ; c, β) for ℓ = 0..=upto.
pub fn dp_log_pmf_range(c: u64, upto: u64, beta: f64) -> Result<Vec<f64>> {
    dp_log_pmf(0, c, beta)?;
    let top = ln_gamma(beta + c as f64 + 1.0);
    Ok((0..=upto.min(c)).map(|ell| ln_dp(ell, c, beta, top)).collect())
}
