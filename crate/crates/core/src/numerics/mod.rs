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

//! Log-space special functions and quadrature.

pub mod bessel;
pub mod genfact;
pub mod quadrature;
pub mod special;

pub use bessel::{log_bessel_k_half, log_bessel_k_int};
pub use genfact::{gen_factorial_table, GenFactorialTable};
pub use quadrature::{
    integrate_log, integrate_log_adaptive, integrate_log_segments, tanh_sinh_rule, Domain, QuadratureRule, Segment,
};
pub use special::{log_factorial, log_gamma, log_rising_factorial, log_sum_exp, LogSumExp, LogValue};
