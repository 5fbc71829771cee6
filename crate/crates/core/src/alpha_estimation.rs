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

//! Empirical-Bayes calibration of the prior mass from the sketch counters.
//!
//! Under the NIGP prior each row of bucket counts has marginal likelihood
//!   m β^{m+J/2} e^α / ((π/2)^{J/2} Π_j c_j!) · ∫_0^∞ y^{m−1} (1+2y)^{J/4−m/2} Π_j K_{c_j−1/2}(β√(1+2y)) dy
//! with β = α/J, and rows multiply. α is found by scanning an exponential grid
//! and refining the best cell by golden-section search.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::bessel::ln_k_half_ladder;
use crate::numerics::quadrature::{integrate_log_many, QuadratureOptions, Segment, DEFAULT_TOLERANCE};
use crate::numerics::special::{ln_gamma, log_factorial};
use crate::sketch::Sketch;

/// Grid exponents: α ∈ {2^g : g = GRID_MIN..=GRID_MAX}.
pub const GRID_MIN: i32 = -6;
pub const GRID_MAX: i32 = 24;
/// Absolute tolerance of the golden-section refinement.
pub const ALPHA_TOLERANCE: f64 = 1e-3;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MODE_LOG_RANGE: (f64, f64) = (-60.0, 60.0);
const MODE_TOLERANCE: f64 = 1e-3;

/// Outcome of the likelihood maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub log_likelihood_at_hat: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
    pub tolerance_met: bool,
}

/// Bucket counts of all rows grouped by distinct count value, plus cached
/// log-factorials of those values.
#[derive(Debug, Clone)]
pub struct LikelihoodCache {
    width: usize,
    total: u64,
    /// Distinct counts across rows, ascending.
    values: Vec<u64>,
    log_factorials: Vec<f64>,
    /// Per row: (index into `values`, number of buckets holding it).
    histograms: Vec<Vec<(usize, u64)>>,
    /// ln K_{c−1/2}(z) for each distinct c at the current node.
    bessel: Vec<f64>,
    caching: bool,
}

impl LikelihoodCache {
    pub fn new(rows: &[&[u64]], total: u64) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || width == 0 {
            return Err(Error::invalid("likelihood needs at least one non-empty row"));
        }
        let mut distinct: BTreeMap<u64, usize> = BTreeMap::new();
        for (n, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid(format!("row {n} has {} buckets, expected {width}", row.len())));
            }
            let sum = row.iter().try_fold(0u64, |acc, &c| acc.checked_add(c)).ok_or(Error::CounterOverflow)?;
            if sum != total {
                return Err(Error::RowSumMismatch { row: n, sum, expected: total });
            }
            for &c in row.iter() {
                distinct.insert(c, 0);
            }
        }
        let values: Vec<u64> = distinct.keys().copied().collect();
        for (i, slot) in distinct.values_mut().enumerate() {
            *slot = i;
        }
        let histograms = rows
            .iter()
            .map(|row| {
                let mut h: BTreeMap<usize, u64> = BTreeMap::new();
                for c in row.iter() {
                    *h.entry(distinct[c]).or_insert(0) += 1;
                }
                h.into_iter().collect()
            })
            .collect();
        let log_factorials = values.iter().map(|&c| log_factorial(c)).collect();
        let bessel = vec![0.0; values.len()];
        Ok(LikelihoodCache { width, total, values, log_factorials, histograms, bessel, caching: true })
    }

    /// Recompute every Bessel factor per bucket instead of once per distinct count.
    pub fn without_caching(mut self) -> Self {
        self.caching = false;
        self
    }

    pub fn distinct_counts(&self) -> usize {
        self.values.len()
    }

    fn row_constants(&self, alpha: f64) -> Vec<f64> {
        let (m, j) = (self.total as f64, self.width as f64);
        let beta = alpha / j;
        let shared = m.ln() + (m + 0.5 * j) * beta.ln() + alpha - 0.5 * j * std::f64::consts::FRAC_PI_2.ln();
        self.histograms
            .iter()
            .map(|h| shared - h.iter().map(|&(u, cnt)| cnt as f64 * self.log_factorials[u]).sum::<f64>())
            .collect()
    }

    /// Writes ln of each row's integrand at y into `out`.
    fn integrand(&mut self, alpha: f64, y: f64, out: &mut [f64]) {
        let (m, j) = (self.total as f64, self.width as f64);
        let z = alpha / j * (0.5 * (2.0 * y).ln_1p()).exp();
        let base = (m - 1.0) * y.ln() + (0.25 * j - 0.5 * m) * (2.0 * y).ln_1p();
        if self.caching {
            ln_k_half_ladder(&self.values, z, &mut self.bessel);
        }
        for (slot, hist) in out.iter_mut().zip(&self.histograms) {
            let mut acc = base;
            for &(u, cnt) in hist {
                let lk = if self.caching {
                    self.bessel[u]
                } else {
                    let mut single = [0.0];
                    ln_k_half_ladder(&self.values[u..=u], z, &mut single);
                    single[0]
                };
                acc += cnt as f64 * lk;
            }
            *slot = acc;
        }
    }

    /// Log marginal likelihood of all rows at mass α.
    pub fn log_likelihood(&mut self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) || alpha.is_infinite() {
            return Err(Error::invalid(format!("alpha must be finite and positive, got {alpha}")));
        }
        if self.total == 0 {
            return Ok(0.0);
        }
        let rows = self.histograms.len();
        let mut scratch = vec![0.0; rows];
        let mut summed = |cache: &mut Self, ly: f64| {
            cache.integrand(alpha, ly.exp(), &mut scratch);
            scratch.iter().sum::<f64>()
        };
        let (log_mode, peak) =
            golden_section_max(|ly| Ok(summed(self, ly)), MODE_LOG_RANGE.0, MODE_LOG_RANGE.1, MODE_TOLERANCE)
                .map(|(x, fx, _)| (x, fx))?;
        let mode = log_mode.exp();
        // Integrand values are sums of terms far larger than their result; the
        // stopping rule must not ask for agreement below their rounding noise.
        let options = QuadratureOptions {
            tolerance: DEFAULT_TOLERANCE.max(1e-14 * (peak.abs() / rows as f64 + self.total as f64)),
            ..QuadratureOptions::default()
        };
        let mut pieces = vec![0.0; rows];
        let mut total = vec![f64::NEG_INFINITY; rows];
        for segment in
            [Segment::Finite { a: 0.0, b: mode, b_complement: 1.0 - mode }, Segment::Tail { start: mode, scale: mode }]
        {
            integrate_log_many(|y, _, out| self.integrand(alpha, y, out), rows, segment, &options, &mut pieces)?;
            for (t, p) in total.iter_mut().zip(&pieces) {
                *t = crate::numerics::special::log_add_exp(*t, *p);
            }
        }
        Ok(self.row_constants(alpha).iter().zip(&total).map(|(v, i)| v + i).sum())
    }
}

/// Σ_n ln L_n(α) for rows that each sum to m, under the NIGP prior.
pub fn log_marginal_likelihood(rows: &[&[u64]], m: u64, alpha: f64, width: usize) -> Result<f64> {
    check_width(rows, width)?;
    LikelihoodCache::new(rows, m)?.log_likelihood(alpha)
}

/// Σ_n ln L_n(α) under the DP prior: the Dirichlet-multinomial with parameters α/J.
pub fn dp_log_marginal_likelihood(rows: &[&[u64]], m: u64, alpha: f64, width: usize) -> Result<f64> {
    check_width(rows, width)?;
    LikelihoodCache::new(rows, m)?;
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::invalid(format!("alpha must be finite and positive, got {alpha}")));
    }
    let beta = alpha / width as f64;
    let shared = log_factorial(m) + ln_gamma(alpha) - ln_gamma(alpha + m as f64);
    let lg_beta = ln_gamma(beta);
    Ok(rows
        .iter()
        .map(|row| shared + row.iter().map(|&c| ln_gamma(beta + c as f64) - lg_beta - log_factorial(c)).sum::<f64>())
        .sum())
}

fn check_width(rows: &[&[u64]], width: usize) -> Result<()> {
    match rows.iter().position(|r| r.len() != width) {
        Some(n) => Err(Error::invalid(format!("row {n} has {} buckets, expected {width}", rows[n].len()))),
        None => Ok(()),
    }
}

/// Maximizes f on [a, b] to the given absolute tolerance; returns (x, f(x), iterations).
pub fn golden_section_max<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, u32)> {
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        iterations += 1;
    }
    Ok(if fc > fd { (c, fc, iterations) } else { (d, fd, iterations) })
}

/// Grid scan over 2^g followed by golden-section refinement between the grid
/// neighbours of the best point.
pub fn estimate_alpha_with<F: FnMut(f64) -> Result<f64>>(mut log_likelihood: F) -> Result<AlphaEstimate> {
    let grid: Vec<f64> = (GRID_MIN..=GRID_MAX).map(|g| (g as f64).exp2()).collect();
    let values = grid.iter().map(|&a| log_likelihood(a)).collect::<Result<Vec<f64>>>()?;
    let best = values.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map(|(i, _)| i).expect("grid is non-empty");
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::GridBoundary { alpha: grid[best] });
    }
    let bracket = (grid[best - 1], grid[best + 1]);
    let (x, fx, iterations) = golden_section_max(&mut log_likelihood, bracket.0, bracket.1, ALPHA_TOLERANCE)?;
    let (alpha_hat, log_likelihood_at_hat) = if fx >= values[best] { (x, fx) } else { (grid[best], values[best]) };
    Ok(AlphaEstimate { alpha_hat, log_likelihood_at_hat, bracket, iterations, tolerance_met: true })
}

/// Maximum-likelihood NIGP mass from the sketch counters.
pub fn estimate_alpha(sketch: &Sketch) -> Result<AlphaEstimate> {
    if sketch.total() == 0 {
        return Err(Error::invalid("cannot calibrate alpha on an empty sketch"));
    }
    let rows: Vec<&[u64]> = sketch.rows().collect();
    let mut cache = LikelihoodCache::new(&rows, sketch.total())?;
    estimate_alpha_with(|a| cache.log_likelihood(a))
}

/// Maximum-likelihood DP mass from the sketch counters.
pub fn estimate_alpha_dp(sketch: &Sketch) -> Result<AlphaEstimate> {
    if sketch.total() == 0 {
        return Err(Error::invalid("cannot calibrate alpha on an empty sketch"));
    }
    let rows: Vec<&[u64]> = sketch.rows().collect();
    estimate_alpha_with(|a| dp_log_marginal_likelihood(&rows, sketch.total(), a, sketch.width()))
}

/// Inverse Gaussian variate with mean μ and shape λ (Michael, Schucany and Haas),
/// with the smaller root written to avoid cancellation.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let r = mu * nu * nu / (2.0 * lambda);
    let x = mu / (1.0 + r + (r * (2.0 + r)).sqrt());
    let u: f64 = rng.random();
    if u <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// Draws N rows of J bucket counts summing to m: bucket weights are independent
/// IG(α/J, 1) variables (mean α/J, shape (α/J)²), normalized, then m tokens are
/// spread by a multinomial.
pub fn sample_bucket_rows(alpha: f64, width: usize, depth: usize, m: u64, seed: u64) -> Result<Vec<Vec<u64>>> {
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::invalid(format!("alpha must be finite and positive, got {alpha}")));
    }
    if width == 0 || depth == 0 {
        return Err(Error::invalid("width and depth must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = alpha / width as f64;
    let mut rows = Vec::with_capacity(depth);
    for _ in 0..depth {
        let weights: Vec<f64> = (0..width).map(|_| sample_inverse_gaussian(a, a * a, &mut rng)).collect();
        rows.push(multinomial(m, &weights, &mut rng)?);
    }
    Ok(rows)
}

fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut remaining_mass: f64 = weights.iter().sum();
    let mut remaining = n;
    let mut out = vec![0u64; weights.len()];
    for (j, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == weights.len() {
            out[j] = remaining;
            break;
        }
        let p = (w / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p).map_err(|e| Error::invalid(e.to_string()))?.sample(rng);
        out[j] = draw;
        remaining -= draw;
        remaining_mass -= w;
        if remaining_mass <= 0.0 {
            remaining_mass = f64::MIN_POSITIVE;
        }
    }
    Ok(out)
}
