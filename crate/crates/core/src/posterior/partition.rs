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

//! NGGP partition weights V_{m,k}, partition statistics and the exact
//! enumeration oracle for the predictive pmf.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{bisect_sign_change, half_line_split, integrate_log_segments, Segment};
use crate::numerics::special::{ln_gamma, ln_rising, log_factorial};

/// Largest stream length accepted by [`exact_pmf_enumeration`].
pub const ENUMERATION_LIMIT: u64 = 10;

/// ln V_{m,k} for the NGGP with mass α and stability σ:
/// (α 2^{σ−1})^k / Γ(m) · ∫_0^∞ x^{m−1} (1/2 + x)^{kσ−m} exp{−(α/(2σ)) ((1+2x)^σ − 1)} dx.
pub fn log_v(m: u64, k: u64, alpha: f64, sigma: f64) -> Result<f64> {
    if m < 1 || k < 1 || k > m + 1 {
        return Err(Error::invalid(format!("V_(m,k) needs 1 <= k <= m + 1, got m = {m}, k = {k}")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::invalid(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::invalid(format!("mass must be finite and positive, got {alpha}")));
    }
    let (mf, kf) = (m as f64, k as f64);
    let power = kf * sigma - mf;
    let rate = alpha / (2.0 * sigma);
    let integrand =
        |x: f64, _| (mf - 1.0) * x.ln() + power * (0.5 + x).ln() - rate * (sigma * (2.0 * x).ln_1p()).exp_m1();
    // d/d(ln x) of the log integrand
    let slope = |lx: f64| {
        let x = lx.exp();
        (mf - 1.0) + power * x / (0.5 + x) - alpha * x * ((sigma - 1.0) * (2.0 * x).ln_1p()).exp()
    };
    let segments: Vec<Segment> = match bisect_sign_change(slope, -50.0, 50.0, 40) {
        Some(lx) => half_line_split(lx.exp()).to_vec(),
        None => vec![Segment::half_line()],
    };
    let prefactor = kf * (alpha.ln() + (sigma - 1.0) * std::f64::consts::LN_2) - ln_gamma(mf);
    Ok(prefactor + integrate_log_segments(integrand, &segments)?)
}

/// Memoized ln V_{m,k} for fixed (α, σ).
#[derive(Debug, Clone)]
pub struct VTable {
    alpha: f64,
    sigma: f64,
    cache: HashMap<(u64, u64), f64>,
}

impl VTable {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        // validates the parameters once
        log_v(1, 1, alpha, sigma)?;
        Ok(VTable { alpha, sigma, cache: HashMap::new() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_v(&mut self, m: u64, k: u64) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(m, k)) {
            return Ok(v);
        }
        let v = log_v(m, k, self.alpha, self.sigma)?;
        self.cache.insert((m, k), v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// Number of blocks and multiplicities M_r (blocks of size r) of a partition of m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionStats {
    pub m: u64,
    pub k: u64,
    /// `multiplicities[r − 1]` is M_r for r = 1..=m.
    pub multiplicities: Vec<u64>,
}

impl PartitionStats {
    pub fn from_block_sizes(sizes: &[u64]) -> Self {
        let m: u64 = sizes.iter().sum();
        let mut multiplicities = vec![0u64; m as usize];
        for &s in sizes.iter().filter(|&&s| s > 0) {
            multiplicities[s as usize - 1] += 1;
        }
        PartitionStats { m, k: sizes.iter().filter(|&&s| s > 0).count() as u64, multiplicities }
    }

    /// M_r, zero outside 1..=m.
    pub fn multiplicity(&self, r: u64) -> u64 {
        if r == 0 {
            return 0;
        }
        self.multiplicities.get(r as usize - 1).copied().unwrap_or(0)
    }

    pub fn is_consistent(&self) -> bool {
        let k: u64 = self.multiplicities.iter().sum();
        let m: u64 = self.multiplicities.iter().enumerate().map(|(i, &c)| (i as u64 + 1) * c).sum();
        k == self.k && m == self.m
    }
}

/// Calls `visit` with the multiplicity vector (index r − 1) of every integer partition of m.
fn for_each_partition(m: usize, visit: &mut dyn FnMut(&[u64])) {
    fn recurse(remaining: usize, max_part: usize, mult: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        if remaining == 0 {
            visit(mult);
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            mult[part - 1] += 1;
            recurse(remaining - part, part, mult, visit);
            mult[part - 1] -= 1;
        }
    }
    let mut mult = vec![0u64; m];
    recurse(m, m, &mut mult, visit);
}

/// Pr[the next token belongs to a block of size ℓ] after m tokens, summing the
/// predictive rule over every multiplicity vector weighted by its probability.
pub fn exact_pmf_enumeration(ell: u64, m: u64, alpha: f64, sigma: f64) -> Result<f64> {
    if m > ENUMERATION_LIMIT {
        return Err(Error::invalid(format!("enumeration supports m <= {ENUMERATION_LIMIT}, got {m}")));
    }
    if ell > m {
        return Err(Error::invalid(format!("frequency {ell} exceeds stream length {m}")));
    }
    let mut table = VTable::new(alpha, sigma)?;
    if m == 0 {
        return Ok(if ell == 0 { 1.0 } else { 0.0 });
    }
    let mut partitions: Vec<Vec<u64>> = Vec::new();
    for_each_partition(m as usize, &mut |mult| partitions.push(mult.to_vec()));
    let mut total = 0.0;
    for mult in partitions {
        let k: u64 = mult.iter().sum();
        if ell > 0 && mult[ell as usize - 1] == 0 {
            continue;
        }
        let v = table.log_v(m, k)?;
        let mut log_weight = v + log_factorial(m);
        for (i, &count) in mult.iter().enumerate() {
            if count > 0 {
                let size = i as u64 + 1;
                let per_block = ln_rising(1.0 - sigma, size - 1) - log_factorial(size);
                log_weight += count as f64 * per_block - log_factorial(count);
            }
        }
        let log_predictive = if ell == 0 {
            table.log_v(m + 1, k + 1)? - v
        } else {
            table.log_v(m + 1, k)? - v + ((ell as f64 - sigma) * mult[ell as usize - 1] as f64).ln()
        };
        total += (log_weight + log_predictive).exp();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::genfact::gen_factorial_table;
    use crate::posterior::pmf::nigp_log_pmf;

    #[test]
    fn v11_is_one() {
        for (alpha, sigma) in [(0.3, 0.5), (2.0, 0.1), (11.0, 0.9), (1.0, 0.5)] {
            assert!(log_v(1, 1, alpha, sigma).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn small_sigma_approaches_dirichlet() {
        let got = log_v(4, 2, 2.0, 1e-5).unwrap();
        assert!((got + 24f64.ln()).abs() < 1e-3, "{got}");
        for m in 1..=8u64 {
            for k in 1..=m {
                let alpha = 3.0f64;
                let dp = k as f64 * (alpha / 2.0).ln() - ln_rising(alpha / 2.0, m);
                let got = log_v(m, k, alpha, 1e-5).unwrap();
                assert!((got - dp).exp_m1().abs() < 1e-3, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn number_of_blocks_law_normalizes() {
        let (alpha, sigma) = (1.0, 0.5);
        let table = gen_factorial_table(sigma, 10).unwrap();
        for m in 1..=10u64 {
            let total: f64 = (1..=m)
                .map(|k| {
                    let v = log_v(m, k, alpha, sigma).unwrap();
                    (v - k as f64 * sigma.ln() + table.log_coefficient(m as usize, k as usize)).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "m={m} total={total}");
        }
    }

    #[test]
    fn weights_satisfy_recurrence() {
        let (alpha, sigma) = (1.7, 0.35);
        for m in 1..8u64 {
            for k in 1..=m {
                let lhs = log_v(m, k, alpha, sigma).unwrap().exp();
                let rhs = log_v(m + 1, k + 1, alpha, sigma).unwrap().exp()
                    + (m as f64 - k as f64 * sigma) * log_v(m + 1, k, alpha, sigma).unwrap().exp();
                assert!((lhs / rhs - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn enumeration_sums_to_one() {
        let total: f64 = (0..=6).map(|ell| exact_pmf_enumeration(ell, 6, 1.0, 0.5).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn enumeration_single_token() {
        let (alpha, sigma) = (2.5, 0.3);
        let p0 = exact_pmf_enumeration(0, 1, alpha, sigma).unwrap();
        let p1 = exact_pmf_enumeration(1, 1, alpha, sigma).unwrap();
        assert!((p0 + p1 - 1.0).abs() < 1e-10);
        let want = (log_v(2, 1, alpha, sigma).unwrap() - log_v(1, 1, alpha, sigma).unwrap()).exp() * (1.0 - sigma);
        assert!((p1 - want).abs() < 1e-12);
    }

    #[test]
    fn enumeration_matches_analytic_pmf() {
        for ell in 0..=5 {
            let e = exact_pmf_enumeration(ell, 5, 2.0, 0.5).unwrap();
            let a = nigp_log_pmf(ell, 5, 2.0).unwrap().exp();
            assert!((e - a).abs() < 1e-6, "ell={ell}: {e} vs {a}");
        }
    }

    #[test]
    fn enumeration_guards() {
        assert!(exact_pmf_enumeration(0, 11, 1.0, 0.5).is_err());
        assert!(exact_pmf_enumeration(4, 3, 1.0, 0.5).is_err());
        assert_eq!(exact_pmf_enumeration(0, 0, 1.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn partition_count_and_stats() {
        let mut n = 0;
        for_each_partition(10, &mut |mult| {
            n += 1;
            let m: u64 = mult.iter().enumerate().map(|(i, c)| (i as u64 + 1) * c).sum();
            assert_eq!(m, 10);
        });
        assert_eq!(n, 42);
        let stats = PartitionStats::from_block_sizes(&[3, 1, 1, 2]);
        assert_eq!((stats.m, stats.k), (7, 4));
        assert_eq!(stats.multiplicity(1), 2);
        assert_eq!(stats.multiplicity(3), 1);
        assert_eq!(stats.multiplicity(9), 0);
        assert!(stats.is_consistent());
    }

    #[test]
    fn table_memoizes() {
        let mut t = VTable::new(1.0, 0.5).unwrap();
        let a = t.log_v(5, 2).unwrap();
        assert_eq!(t.log_v(5, 2).unwrap(), a);
        assert_eq!(t.len(), 1);
        assert!(VTable::new(1.0, 1.0).is_err());
        assert!(t.log_v(3, 5).is_err());
    }
}
