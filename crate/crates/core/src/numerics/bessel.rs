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

//! Modified Bessel functions of the second kind in log form.
//!
//! Integer orders come from K_0 and K_1 and upward recurrence. K_0 and K_1 use
//! the power series for z ≤ 2, Steed's continued fraction on (2, 25] and the
//! Hankel asymptotic expansion beyond. Half-integer orders use the terminating
//! series for K_{n+1/2}.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// ln K_ν(z) for integer ν; K is symmetric in its order.
pub fn log_bessel_k_int(nu: i64, z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(ln_k_int(nu.unsigned_abs(), z))
}

pub(crate) fn ln_k_int(nu: u64, z: f64) -> f64 {
    let (k0, k1) = ln_k01(z);
    match nu {
        0 => k0,
        1 => k1,
        _ => {
            let mut ratio = (k1 - k0).exp();
            let mut acc = k1;
            for n in 1..nu {
                ratio = 1.0 / ratio + 2.0 * n as f64 / z;
                acc += ratio.ln();
            }
            acc
        }
    }
}

/// (ln K_0(z), ln K_1(z)).
pub(crate) fn ln_k01(z: f64) -> (f64, f64) {
    if z <= SERIES_LIMIT {
        series_k01(z)
    } else if z <= ASYMPTOTIC_LIMIT {
        steed_k01(z)
    } else {
        (asymptotic_ln_k(0.0, z), asymptotic_ln_k(1.0, z))
    }
}

fn series_k01(z: f64) -> (f64, f64) {
    let x2 = 0.25 * z * z;
    let log_half = (0.5 * z).ln();
    let mut t = 1.0;
    let mut harmonic = 0.0;
    let (mut i0, mut s0) = (0.0, 0.0);
    let (mut i1, mut s1) = (0.0, 0.0);
    let mut k = 0u32;
    loop {
        let kf = k as f64;
        let u = t / (kf + 1.0);
        let next_harmonic = harmonic + 1.0 / (kf + 1.0);
        i0 += t;
        s0 += harmonic * t;
        i1 += u;
        s1 += (harmonic + next_harmonic - 2.0 * EULER_GAMMA) * u;
        if t < 1e-18 * i0 {
            break;
        }
        harmonic = next_harmonic;
        k += 1;
        t *= x2 / ((k as f64) * (k as f64));
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / z + log_half * (0.5 * z * i1) - 0.25 * z * s1;
    (k0.ln(), k1.ln())
}

fn steed_k01(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x - s.ln();
    let k1 = k0 + ((x + 0.5 - h) / x).ln();
    (k0, k1)
}

fn asymptotic_ln_k(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * z);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z + sum.ln()
}

/// ln K_{c−1/2}(z) from the terminating series; c = 0 maps to order 1/2 by symmetry.
pub fn log_bessel_k_half(c: u64, z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(ln_k_half(c, z))
}

pub(crate) fn ln_k_half(c: u64, z: f64) -> f64 {
    let n = c.saturating_sub(1) as f64;
    let two_z = 2.0 * z;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut log_scale = 0.0;
    let mut j = 0.0;
    while j < n {
        term *= (n + j + 1.0) * (n - j) / ((j + 1.0) * two_z);
        sum += term;
        if sum > 1e250 {
            log_scale += sum.ln();
            term /= sum;
            sum = 1.0;
        }
        j += 1.0;
    }
    half_order_base(z) + log_scale + sum.ln()
}

fn half_order_base(z: f64) -> f64 {
    0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z
}

/// Fills `out[i] = ln K_{orders[i]−1/2}(z)` for nondecreasing `orders` by forward
/// recurrence in the order, which is stable for K.
pub(crate) fn ln_k_half_ladder(orders: &[u64], z: f64, out: &mut [f64]) {
    debug_assert_eq!(orders.len(), out.len());
    debug_assert!(orders.windows(2).all(|w| w[0] <= w[1]));
    let base = half_order_base(z);
    // `level` is n where the current order is n + 1/2, i.e. c = n + 1.
    let mut level = 0u64;
    let mut acc = base;
    let mut product = 1.0f64;
    let mut ratio = 1.0 + 1.0 / z;
    for (slot, &c) in out.iter_mut().zip(orders) {
        let target = c.saturating_sub(1);
        while level < target {
            if ratio > 1e100 {
                acc += ratio.ln();
            } else {
                product *= ratio;
                if product > 1e200 {
                    acc += product.ln();
                    product = 1.0;
                }
            }
            level += 1;
            ratio = 1.0 / ratio + (2 * level + 1) as f64 / z;
        }
        *slot = acc + product.ln();
    }
}

fn check_argument(z: f64) -> Result<()> {
    if !(z > 0.0) || z.is_infinite() {
        return Err(Error::invalid(format!("Bessel K requires finite z > 0, got {z}")));
    }
    Ok(())
}
