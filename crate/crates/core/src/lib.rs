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

//! Count-min sketch with Bayesian nonparametric point queries.
//!
//! The sketch hashes a token stream into N rows of J counters. Besides the
//! classical min and count-mean-min estimators, the crate computes the posterior
//! of a token's frequency under a normalized inverse Gaussian process prior,
//! calibrates the prior mass from the sketch alone, and ships the stream
//! generators and experiment harness used to compare the estimators.

pub mod alpha_estimation;
pub mod error;
pub mod experiment;
pub mod hashing;
pub mod numerics;
pub mod posterior;
pub mod sketch;
pub mod streams;

pub use error::{Error, FormatError, Result};
