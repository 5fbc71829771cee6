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

//! Monte Carlo representation of the NIGP pmf, used as an independent oracle.
//!
//! For ℓ = m the pmf equals (1/2)_(m)/m! · E[exp(α − α² X / Y)] with
//! Y ~ Beta(1/2, m + 1/2) and X = 1/(4E), E standard exponential (the
//! polynomially tilted inverse Gaussian of order 1/2). For ℓ < m it equals
//! binom(m, ℓ) Γ(ℓ + 1/2) Γ(m − ℓ) / (π Γ(m + 1/2)) · α e^α · E[K_1(α/√Y)] with
//! Y ~ Beta(m − ℓ, ℓ + 1/2).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1};

use crate::error::{Error, Result};
use crate::numerics::bessel::ln_k_int;
use crate::numerics::special::{ln_gamma, ln_rising, log_binomial};

pub const MIN_SAMPLES: usize = 10_000;

/// (estimate, standard error) of p(ℓ; m, α).
pub fn mc_nigp_pmf(ell: u64, m: u64, alpha: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    if ell > m {
        return Err(Error::invalid(format!("frequency {ell} exceeds bucket total {m}")));
    }
    if !(alpha > 0.0) || alpha.is_infinite() {
        return Err(Error::invalid(format!("mass must be finite and positive, got {alpha}")));
    }
    if m == 0 {
        return Ok((1.0, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mf, lf) = (m as f64, ell as f64);
    let (log_prefactor, samples): (f64, Vec<f64>) = if ell == m {
        let beta = Beta::new(0.5, mf + 0.5).map_err(|e| Error::invalid(e.to_string()))?;
        let draws = (0..n_samples)
            .map(|_| {
                let y: f64 = beta.sample(&mut rng);
                let e: f64 = Exp1.sample(&mut rng);
                let x = 0.25 / e;
                (alpha - alpha * alpha * x / y).exp()
            })
            .collect();
        (ln_rising(0.5, m) - ln_gamma(mf + 1.0), draws)
    } else {
        let beta = Beta::new(mf - lf, lf + 0.5).map_err(|e| Error::invalid(e.to_string()))?;
        let draws = (0..n_samples)
            .map(|_| {
                let y: f64 = beta.sample(&mut rng);
                (alpha + ln_k_int(1, alpha / y.sqrt())).exp()
            })
            .collect();
        let lp = log_binomial(m, ell) + ln_gamma(lf + 0.5) + ln_gamma(mf - lf)
            - std::f64::consts::PI.ln()
            - ln_gamma(mf + 0.5)
            + alpha.ln();
        (lp, draws)
    };
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = log_prefactor.exp();
    Ok((scale * mean, scale * (var / n).sqrt()))
}
