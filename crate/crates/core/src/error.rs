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

use thiserror::Error;

/// Errors raised while decoding a serialized sketch.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"CMSN\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated input: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after counters")]
    TrailingBytes(usize),
    #[error("inconsistent sketch: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty token cannot be fingerprinted")]
    EmptyToken,
    #[error("row {row} out of range for depth {depth}")]
    RowOutOfRange { row: usize, depth: usize },
    #[error("counter overflow")]
    CounterOverflow,
    #[error("hash families differ: {0}")]
    FamilyMismatch(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("quadrature did not converge by level {level}: last {last}, previous {previous}")]
    Quadrature { level: u32, last: f64, previous: f64 },
    #[error("row {row} sums to {sum}, expected {expected}")]
    RowSumMismatch { row: usize, sum: u64, expected: u64 },
    #[error("likelihood maximized at grid boundary alpha = {alpha}; widen the grid")]
    GridBoundary { alpha: f64 },
    #[error("predictive probabilities sum to {total} at step {step}")]
    InconsistentPredictive { step: u64, total: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::GridBoundary { .. } | Error::InconsistentPredictive { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
