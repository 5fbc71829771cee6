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

//! Posterior distribution of a token's frequency given its hashed counts.
//!
//! Each row contributes the pmf of the frequency given that row's bucket total,
//! with the prior mass restricted to the bucket. Rows combine by multiplying
//! their pmfs over ℓ ≤ min_n c_n and renormalizing.

pub mod dp;
pub mod montecarlo;
pub mod partition;
pub mod pmf;

pub use dp::{dp_log_pmf, dp_log_pmf_range};
pub use montecarlo::mc_nigp_pmf;
pub use partition::{exact_pmf_enumeration, log_v, PartitionStats, VTable};
pub use pmf::{nigp_log_pmf, nigp_log_pmf_range, NigpPmfCache};

use crate::error::{Error, Result};
use crate::numerics::special::LogSumExp;
use crate::sketch::BucketVector;

/// Stability parameter of the NIGP.
pub const NIGP_SIGMA: f64 = 0.5;

/// Calibrated NIGP prior for a sketch of width J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigpModel {
    alpha: f64,
    width: usize,
}

impl NigpModel {
    pub fn new(alpha: f64, width: usize) -> Result<Self> {
        if !(alpha > 0.0) || alpha.is_infinite() {
            return Err(Error::invalid(format!("alpha must be finite and positive, got {alpha}")));
        }
        if width == 0 {
            return Err(Error::invalid("width must be at least 1"));
        }
        Ok(NigpModel { alpha, width })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sigma(&self) -> f64 {
        NIGP_SIGMA
    }

    /// Prior mass of a single bucket, α / J.
    pub fn bucket_mass(&self) -> f64 {
        self.alpha / self.width as f64
    }
}

/// A normalized pmf over ℓ = 0..=L stored as log probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPmf {
    log_probs: Vec<f64>,
}

impl PosteriorPmf {
    /// Normalizes unnormalized log weights.
    pub fn from_log_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("pmf needs at least one support point"));
        }
        let mut acc = LogSumExp::new();
        weights.iter().for_each(|&w| acc.push(w));
        let total = acc.value();
        if !total.is_finite() {
            return Err(Error::invalid(format!("pmf weights have log total {total}")));
        }
        weights.iter_mut().for_each(|w| *w = (*w - total).min(0.0));
        Ok(PosteriorPmf { log_probs: weights })
    }

    pub fn point_mass(at: u64) -> Self {
        let mut log_probs = vec![f64::NEG_INFINITY; at as usize + 1];
        log_probs[at as usize] = 0.0;
        PosteriorPmf { log_probs }
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Largest ℓ in the support.
    pub fn support_bound(&self) -> u64 {
        self.log_probs.len() as u64 - 1
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn mean(&self) -> f64 {
        posterior_mean(self)
    }

    pub fn median(&self) -> u64 {
        posterior_median(self)
    }

    pub fn mode(&self) -> u64 {
        posterior_mode(self)
    }

    /// Equal-tailed interval: the smallest ℓ with CDF ≥ (1 − level)/2 and the
    /// smallest ℓ with CDF ≥ (1 + level)/2.
    pub fn credible_interval(&self, level: f64) -> (u64, u64) {
        let tail = 0.5 * (1.0 - level);
        (self.quantile(tail), self.quantile(1.0 - tail))
    }

    /// Smallest ℓ whose CDF reaches q.
    pub fn quantile(&self, q: f64) -> u64 {
        let mut cdf = 0.0;
        for (ell, lp) in self.log_probs.iter().enumerate() {
            cdf += lp.exp();
            if cdf >= q - 1e-12 {
                return ell as u64;
            }
        }
        self.support_bound()
    }
}

pub fn posterior_mean(pmf: &PosteriorPmf) -> f64 {
    pmf.log_probs.iter().enumerate().map(|(ell, lp)| ell as f64 * lp.exp()).sum()
}

/// Lower median.
pub fn posterior_median(pmf: &PosteriorPmf) -> u64 {
    pmf.quantile(0.5)
}

/// Most probable ℓ, smallest on ties.
pub fn posterior_mode(pmf: &PosteriorPmf) -> u64 {
    let mut best = 0;
    for (ell, &lp) in pmf.log_probs.iter().enumerate() {
        if lp > pmf.log_probs[best] {
            best = ell;
        }
    }
    best as u64
}

/// Posterior of the frequency given one bucket total c.
pub fn nigp_bucket_posterior(c: u64, model: &NigpModel) -> Result<PosteriorPmf> {
    PosteriorPmf::from_log_weights(nigp_log_pmf_range(c, c, model.bucket_mass())?)
}

/// Posterior of the frequency given the bucket vector of a token.
pub fn nigp_sketch_posterior(bv: &BucketVector, model: &NigpModel) -> Result<PosteriorPmf> {
    let bound = support_bound(bv)?;
    let rows =
        bv.values.iter().map(|&c| nigp_log_pmf_range(c, bound, model.bucket_mass())).collect::<Result<Vec<_>>>()?;
    combine_rows(rows.iter().map(Vec::as_slice), bound)
}

/// Same as [`nigp_sketch_posterior`] reading per-bucket pmfs from a warmed cache.
pub fn nigp_sketch_posterior_cached(bv: &BucketVector, cache: &NigpPmfCache) -> Result<PosteriorPmf> {
    let bound = support_bound(bv)?;
    let rows = bv
        .values
        .iter()
        .map(|&c| {
            cache
                .get(c)
                .filter(|v| v.len() as u64 > bound)
                .ok_or_else(|| Error::invalid(format!("pmf cache lacks bucket total {c} up to {bound}")))
        })
        .collect::<Result<Vec<_>>>()?;
    combine_rows(rows.into_iter(), bound)
}

/// DP posterior given one bucket total, with bucket mass β.
pub fn dp_bucket_posterior(c: u64, beta: f64) -> Result<PosteriorPmf> {
    PosteriorPmf::from_log_weights(dp_log_pmf_range(c, c, beta)?)
}

/// DP posterior given a bucket vector, with bucket mass β.
pub fn dp_sketch_posterior(bv: &BucketVector, beta: f64) -> Result<PosteriorPmf> {
    let bound = support_bound(bv)?;
    let rows = bv.values.iter().map(|&c| dp_log_pmf_range(c, bound, beta)).collect::<Result<Vec<_>>>()?;
    combine_rows(rows.iter().map(Vec::as_slice), bound)
}

fn support_bound(bv: &BucketVector) -> Result<u64> {
    if bv.is_empty() {
        return Err(Error::invalid("bucket vector has no rows"));
    }
    Ok(bv.min())
}

pub(crate) fn combine_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, bound: u64) -> Result<PosteriorPmf> {
    let mut weights = vec![0.0; bound as usize + 1];
    for row in rows {
        for (w, &lp) in weights.iter_mut().zip(row) {
            *w += lp;
        }
    }
    PosteriorPmf::from_log_weights(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::log_sum_exp;
    use proptest::prelude::*;

    fn model(alpha: f64, width: usize) -> NigpModel {
        NigpModel::new(alpha, width).unwrap()
    }

    #[test]
    fn summaries() {
        let p = PosteriorPmf::point_mass(7);
        assert_eq!((p.mean(), p.median(), p.mode()), (7.0, 7, 7));
        let u = PosteriorPmf::from_log_weights(vec![0.0, 0.0]).unwrap();
        assert_eq!((u.mean(), u.median(), u.mode()), (0.5, 0, 0));
        let skew = PosteriorPmf::from_log_weights(vec![0.1f64.ln(), 0.2f64.ln(), 0.3f64.ln(), 0.4f64.ln()]).unwrap();
        assert_eq!(skew.credible_interval(0.95), (0, 3));
        assert_eq!(skew.credible_interval(0.5), (1, 3));
        assert!(PosteriorPmf::from_log_weights(vec![]).is_err());
        assert!(PosteriorPmf::from_log_weights(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn empty_bucket_is_point_mass_at_zero() {
        let p = nigp_bucket_posterior(0, &model(3.0, 10)).unwrap();
        assert_eq!(p.log_probs(), &[0.0]);
        let q = nigp_sketch_posterior(&BucketVector::new(vec![5, 0, 9]), &model(3.0, 10)).unwrap();
        assert_eq!(q.log_probs(), &[0.0]);
        assert!(nigp_sketch_posterior(&BucketVector::new(vec![]), &model(3.0, 10)).is_err());
    }

    #[test]
    fn single_row_equals_bucket_posterior() {
        let m = model(8.0, 4);
        let a = nigp_bucket_posterior(12, &m).unwrap();
        let b = nigp_sketch_posterior(&BucketVector::new(vec![12]), &m).unwrap();
        for (x, y) in a.log_probs().iter().zip(b.log_probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_is_irrelevant() {
        let m = model(5.0, 3);
        let a = nigp_sketch_posterior(&BucketVector::new(vec![9, 14, 11]), &m).unwrap();
        let b = nigp_sketch_posterior(&BucketVector::new(vec![11, 9, 14]), &m).unwrap();
        for (x, y) in a.log_probs().iter().zip(b.log_probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bucket_posterior_decreases_for_moderate_mass() {
        // for bucket masses of order one and above the pmf falls with ℓ; very small
        // masses put extra weight on ℓ = c and are excluded here
        for (alpha, c) in [(1.0, 10u64), (4.0, 30), (20.0, 60)] {
            let p = nigp_bucket_posterior(c, &model(alpha, 1)).unwrap();
            let lp = p.log_probs();
            for ell in 1..c as usize {
                assert!(lp[ell + 1] < lp[ell], "alpha={alpha} c={c} ell={ell}");
            }
        }
    }

    #[test]
    fn small_mass_is_not_monotone() {
        let p = nigp_bucket_posterior(5, &model(0.1, 1)).unwrap();
        let lp = p.log_probs();
        assert!(lp[5] > lp[4]);
    }

    #[test]
    fn cached_path_matches_direct_path() {
        let m = model(40.0, 8);
        let bv = BucketVector::new(vec![30, 22, 25]);
        let mut cache = NigpPmfCache::new(m.bucket_mass()).unwrap();
        cache.ensure(&[(30, 22), (22, 22), (25, 22)]).unwrap();
        let a = nigp_sketch_posterior_cached(&bv, &cache).unwrap();
        let b = nigp_sketch_posterior(&bv, &m).unwrap();
        assert_eq!(a, b);
        let short = NigpPmfCache::new(m.bucket_mass()).unwrap();
        assert!(nigp_sketch_posterior_cached(&bv, &short).is_err());
    }

    #[test]
    fn dp_posteriors() {
        assert_eq!(dp_bucket_posterior(0, 2.0).unwrap().log_probs(), &[0.0]);
        let p = dp_bucket_posterior(50, 0.3).unwrap();
        assert!(log_sum_exp(p.log_probs()).unwrap().abs() < 1e-10);
        let q = dp_sketch_posterior(&BucketVector::new(vec![50]), 0.3).unwrap();
        assert_eq!(p, q);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn posterior_is_normalized_and_bounded(
            rows in prop::collection::vec(0u64..60, 1..5),
            alpha in 0.05f64..200.0,
            width in 1usize..50,
        ) {
            let bv = BucketVector::new(rows);
            let p = nigp_sketch_posterior(&bv, &model(alpha, width)).unwrap();
            prop_assert!(log_sum_exp(p.log_probs()).unwrap().abs() < 1e-10);
            prop_assert!(p.log_probs().iter().all(|&l| l <= 0.0));
            prop_assert_eq!(p.support_bound(), bv.min());
            prop_assert!(p.mean() <= bv.min() as f64 + 1e-9);
            let (lo, hi) = p.credible_interval(0.95);
            prop_assert!(lo <= p.median() && p.median() <= hi);
        }
    }
}
