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

//! Log-gamma, factorial-type helpers and log-sum-exp.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// A nonnegative quantity stored as its natural logarithm; `-inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue(pub f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_value(x: f64) -> Self {
        LogValue(x.ln())
    }

    pub fn log_magnitude(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn mul(self, other: LogValue) -> LogValue {
        LogValue(self.0 + other.0)
    }

    pub fn add(self, other: LogValue) -> LogValue {
        LogValue(log_add_exp(self.0, other.0))
    }
}

/// ln Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(Error::invalid(format!("log_gamma requires finite x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Unchecked ln Γ(x); callers guarantee x > 0.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum away from its pole.
        return lanczos(x + 1.0) - x.ln();
    }
    lanczos(x)
}

fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (z + 0.5) * t.ln() - t + sum.ln()
}

/// ln (a)_(n) = ln Γ(a + n) − ln Γ(a), the log ascending factorial.
pub fn log_rising_factorial(a: f64, n: u64) -> Result<f64> {
    if !(a > 0.0) || a.is_infinite() {
        return Err(Error::invalid(format!("log_rising_factorial requires a > 0, got {a}")));
    }
    Ok(ln_rising(a, n))
}

pub(crate) fn ln_rising(a: f64, n: u64) -> f64 {
    // Short products are summed directly; the gamma difference cancels badly when a ≫ n.
    if n <= 64 {
        (0..n).map(|i| (a + i as f64).ln()).sum()
    } else {
        ln_gamma(a + n as f64) - ln_gamma(a)
    }
}

/// ln n!.
pub fn log_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// ln binom(n, k); `-inf` when k > n.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ e^{v_i}, shifted by the maximum.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("log_sum_exp of an empty list"));
    }
    let mut acc = LogSumExp::new();
    for &v in values {
        acc.push(v);
    }
    Ok(acc.value())
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled += (v - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn log_gamma_reference_values() {
        let cases = [
            (100.0, 359.134_205_369_575_398_776_044),
            (1e-3, 6.907_178_885_383_853_682_5),
            (0.5, 0.572_364_942_924_700_087_07),
            (7.3, 7.147_892_523_022_249_032_8),
            (100_000.5, 1_051_293.465_435_139_38),
        ];
        for (x, want) in cases {
            assert_relative_eq!(log_gamma(x).unwrap(), want, max_relative = 1e-13);
        }
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(log_gamma(0.5).unwrap(), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-14);
    }

    #[test]
    fn log_gamma_100_is_sum_of_logs() {
        let direct: f64 = (1..100).map(|k| (k as f64).ln()).sum();
        assert_relative_eq!(log_gamma(100.0).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn rising_factorial_values() {
        assert_eq!(log_rising_factorial(0.5, 0).unwrap(), 0.0);
        assert_relative_eq!(log_rising_factorial(0.5, 2).unwrap(), 0.75f64.ln(), max_relative = 1e-15);
        let direct: f64 = (0..50).map(|i| 0.5 + i as f64).product::<f64>().ln();
        assert_relative_eq!(log_rising_factorial(0.5, 50).unwrap(), direct, max_relative = 1e-12);
        let long: f64 = (0..200).map(|i| (0.5 + i as f64).ln()).sum();
        assert_relative_eq!(log_rising_factorial(0.5, 200).unwrap(), long, max_relative = 1e-12);
    }

    #[test]
    fn log_sum_exp_cases() {
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]).unwrap(), 2f64.ln());
        assert_relative_eq!(log_sum_exp(&[-1000.0, -1000.0]).unwrap(), -1000.0 + 2f64.ln());
        let ninf = f64::NEG_INFINITY;
        assert_eq!(log_sum_exp(&[ninf, ninf]).unwrap(), ninf);
        assert!(log_sum_exp(&[]).is_err());
    }

    proptest! {
        #[test]
        fn log_sum_exp_shift_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..20), s in -500.0f64..500.0) {
            let base = log_sum_exp(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
            prop_assert!((log_sum_exp(&shifted).unwrap() - base - s).abs() < 1e-9);
        }

        #[test]
        fn accumulator_merge_matches_single_pass(a in prop::collection::vec(-30.0f64..30.0, 0..10), b in prop::collection::vec(-30.0f64..30.0, 1..10)) {
            let mut left = LogSumExp::new();
            a.iter().for_each(|&x| left.push(x));
            let mut right = LogSumExp::new();
            b.iter().for_each(|&x| right.push(x));
            left.merge(&right);
            let all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            prop_assert!((left.value() - log_sum_exp(&all).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn log_gamma_recurrence(x in 0.01f64..200.0) {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
