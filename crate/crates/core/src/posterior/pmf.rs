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

//! The NIGP marginal pmf p(ℓ; m, α) of a token's frequency given a bucket total m.
//!
//! For ℓ < m
//!   p = binom(m, ℓ) e^α α / π · ∫_0^1 K_1(α/√x) x^{m−ℓ−1} (1−x)^{ℓ−1/2} dx,
//! and for ℓ = m
//!   p = 2^m α (1/2)_(m) / m! · ∫_0^∞ x^m (1+2x)^{−m−1/2} e^{−α(√(1+2x)−1)} dx.
//! Both integrals are split at the mode of the integrand before quadrature.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::bessel::{ln_k01, ln_k_int};
use crate::numerics::quadrature::{bisect_sign_change, half_line_split, integrate_log_segments, unit_split, Segment};
use crate::numerics::special::{ln_gamma, ln_rising, log_binomial};

const MODE_ITERATIONS: u32 = 24;

/// ln p(ℓ; m, α) under the NIGP prior with mass α.
pub fn nigp_log_pmf(ell: u64, m: u64, alpha: f64) -> Result<f64> {
    if ell > m {
        return Err(Error::invalid(format!("frequency {ell} exceeds bucket total {m}")));
    }
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::invalid(format!("mass must be finite and positive, got {alpha}")));
    }
    if m == 0 {
        return Ok(0.0);
    }
    if ell == m {
        log_pmf_all(m, alpha)
    } else {
        log_pmf_partial(ell, m, alpha)
    }
}

fn log_pmf_all(m: u64, alpha: f64) -> Result<f64> {
    let mf = m as f64;
    let prefactor = mf * std::f64::consts::LN_2 + alpha.ln() + ln_rising(0.5, m) - ln_gamma(mf + 1.0);
    let integrand = |x: f64, _| {
        let r = (2.0 * x).ln_1p();
        let shift = 2.0 * x / ((1.0 + 2.0 * x).sqrt() + 1.0);
        mf * x.ln() - (mf + 0.5) * r - alpha * shift
    };
    // the mode solves x (1 + α √(1+2x)) = m
    let mode = bisect_sign_change(
        |lx| {
            let x = lx.exp();
            x * (1.0 + alpha * (1.0 + 2.0 * x).sqrt()) - mf
        },
        (mf / (1.0 + alpha * (1.0 + 2.0 * mf).sqrt())).ln() - 1e-9,
        mf.ln() + 1e-9,
        60,
    )
    .map(f64::exp)
    .unwrap_or(mf);
    Ok(prefactor + integrate_log_segments(integrand, &half_line_split(mode))?)
}

fn log_pmf_partial(ell: u64, m: u64, alpha: f64) -> Result<f64> {
    let a = (m - ell - 1) as f64;
    let b = ell as f64 - 0.5;
    let prefactor = log_binomial(m, ell) + alpha + alpha.ln() - std::f64::consts::PI.ln();
    let integrand = |x: f64, xc: f64| ln_k_int(1, alpha / x.sqrt()) + a * x.ln() + b * xc.ln();
    let segments: Vec<Segment> = if b <= 0.0 {
        // every factor increases towards x = 1
        vec![Segment::unit()]
    } else {
        // sign of x(1−x) d/dx of the log integrand, in logistic coordinates
        let slope = |u: f64| {
            let x = 1.0 / (1.0 + (-u).exp());
            let xc = 1.0 / (1.0 + u.exp());
            let z = alpha / x.sqrt();
            let (k0, k1) = ln_k01(z);
            let bessel = ((k0 - k1).exp() + 1.0 / z) * 0.5 * z;
            a * xc - b * x + bessel * xc
        };
        match bisect_sign_change(slope, -40.0, 40.0, MODE_ITERATIONS) {
            Some(u) => unit_split(u).to_vec(),
            None => vec![Segment::unit()],
        }
    };
    Ok(prefactor + integrate_log_segments(integrand, &segments)?)
}

/// ln p(ℓ; m, α) for ℓ = 0..=upto.
pub fn nigp_log_pmf_range(m: u64, upto: u64, alpha: f64) -> Result<Vec<f64>> {
    (0..=upto.min(m)).map(|ell| nigp_log_pmf(ell, m, alpha)).collect()
}

/// Per-bucket log pmf vectors for a fixed bucket mass, keyed by the bucket total.
#[derive(Debug, Clone)]
pub struct NigpPmfCache {
    mass: f64,
    entries: HashMap<u64, Vec<f64>>,
}

impl NigpPmfCache {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass > 0.0) || mass.is_infinite() {
            return Err(Error::invalid(format!("mass must be finite and positive, got {mass}")));
        }
        Ok(NigpPmfCache { mass, entries: HashMap::new() })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Makes ln p(ℓ; c, mass) available for ℓ ≤ upto for every (c, upto) request,
    /// evaluating missing entries in parallel.
    pub fn ensure(&mut self, requests: &[(u64, u64)]) -> Result<()> {
        let mut needed: HashMap<u64, u64> = HashMap::new();
        for &(c, upto) in requests {
            let upto = upto.min(c);
            let have = self.entries.get(&c).map_or(0, |v| v.len() as u64);
            if upto + 1 > have {
                let slot = needed.entry(c).or_insert(0);
                *slot = (*slot).max(upto);
            }
        }
        let mut jobs: Vec<(u64, u64)> = Vec::new();
        for (&c, &upto) in &needed {
            let start = self.entries.get(&c).map_or(0, |v| v.len() as u64);
            jobs.extend((start..=upto).map(|ell| (c, ell)));
        }
        jobs.sort_unstable();
        let mass = self.mass;
        let values: Vec<f64> = jobs.par_iter().map(|&(c, ell)| nigp_log_pmf(ell, c, mass)).collect::<Result<_>>()?;
        for (&(c, _), v) in jobs.iter().zip(values) {
            self.entries.entry(c).or_default().push(v);
        }
        Ok(())
    }

    /// Cached ln p(·; c, mass), possibly shorter than c + 1.
    pub fn get(&self, c: u64) -> Option<&[f64]> {
        self.entries.get(&c).map(Vec::as_slice)
    }

    pub fn evaluations(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::log_sum_exp;

    fn pmf(m: u64, alpha: f64) -> Vec<f64> {
        nigp_log_pmf_range(m, m, alpha).unwrap().into_iter().map(f64::exp).collect()
    }

    #[test]
    fn reference_values() {
        let want = [
            0.470_954_268_260_495_86,
            0.215_891_107_713_521_68,
            0.141_404_147_291_134_49,
            0.094_325_891_476_055_93,
            0.055_513_834_135_692_71,
            0.021_910_751_123_099_318,
        ];
        for (got, want) in pmf(5, 2.0).iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let one = pmf(1, 1.0);
        assert!((one[0] - 0.701_826_318_838_403).abs() < 1e-12);
        assert!((one[1] - 0.298_173_681_161_597_04).abs() < 1e-12);
        let twenty = pmf(20, 10.0);
        assert!((twenty[0] - 0.462_633_374_120_795_97).abs() < 1e-12);
        assert!((twenty[1] - 0.189_433_852_853_755_47).abs() < 1e-12);
    }

    #[test]
    fn empty_bucket_and_bad_inputs() {
        assert_eq!(nigp_log_pmf(0, 0, 3.0).unwrap(), 0.0);
        assert!(nigp_log_pmf(2, 1, 1.0).is_err());
        assert!(nigp_log_pmf(0, 1, 0.0).is_err());
        assert!(nigp_log_pmf(0, 1, f64::NAN).is_err());
    }

    #[test]
    fn normalization() {
        for m in [1u64, 5, 20, 100] {
            for alpha in [0.1, 1.0, 10.0, 100.0] {
                let lp = nigp_log_pmf_range(m, m, alpha).unwrap();
                let total = log_sum_exp(&lp).unwrap().exp();
                assert!((total - 1.0).abs() < 1e-8, "m={m} alpha={alpha} total={total}");
            }
        }
    }

    #[test]
    fn large_bucket_normalizes() {
        for (m, alpha) in [(2000u64, 0.3), (1500, 40.0)] {
            let lp = nigp_log_pmf_range(m, m, alpha).unwrap();
            let total = log_sum_exp(&lp).unwrap().exp();
            assert!((total - 1.0).abs() < 1e-8, "m={m} alpha={alpha} total={total}");
        }
    }

    #[test]
    fn cache_matches_direct_evaluation() {
        let mut cache = NigpPmfCache::new(0.7).unwrap();
        cache.ensure(&[(6, 2), (9, 9), (6, 4)]).unwrap();
        cache.ensure(&[(6, 5), (0, 0)]).unwrap();
        assert_eq!(cache.get(6).unwrap().len(), 6);
        assert_eq!(cache.get(9).unwrap().len(), 10);
        assert_eq!(cache.get(0).unwrap(), &[0.0]);
        for ell in 0..6 {
            assert_eq!(cache.get(6).unwrap()[ell as usize], nigp_log_pmf(ell, 6, 0.7).unwrap());
        }
    }
}
