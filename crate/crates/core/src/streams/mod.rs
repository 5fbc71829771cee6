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

//! Token sources and ground-truth counting.

mod counter;
mod samplers;
mod text;
mod zipf;

pub use counter::{exact_count, ExactCounter};
pub use samplers::{
    dp_sample_partition, nggp_sample_partition, nggp_sample_partition_with, DpSampler, NggpSampler,
    PREDICTIVE_TOLERANCE,
};
pub use text::{text_stream, TextFormat, TextStream};
pub use zipf::{zipf_stream, ZipfSampler, ZipfStream};

use std::path::PathBuf;

use crate::error::{Error, Result};

/// Source of a token stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    Zipf { s: f64 },
    TextFile { path: PathBuf },
    BagOfWords { path: PathBuf },
    Nggp { sigma: f64, alpha: f64 },
    Dp { beta: f64 },
}

/// A stream source with its length and seed. File sources ignore both and
/// yield the whole file.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub length: u64,
    pub seed: u64,
}

pub type TokenIter = Box<dyn Iterator<Item = Result<String>>>;

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StreamKind::Zipf { s } if !(s > 1.0) || s.is_infinite() => {
                Err(Error::invalid(format!("zipf exponent must exceed 1, got {s}")))
            }
            StreamKind::Nggp { sigma, alpha }
                if !(sigma > 0.0 && sigma < 1.0) || !(alpha > 0.0) || alpha.is_infinite() =>
            {
                Err(Error::invalid(format!(
                    "nggp needs sigma in (0, 1) and alpha > 0, got sigma = {sigma}, alpha = {alpha}"
                )))
            }
            StreamKind::Dp { beta } if !(beta > 0.0) || beta.is_infinite() => {
                Err(Error::invalid(format!("dp mass must be positive, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Opens the stream. Partition samplers emit the block label of each token.
    pub fn tokens(&self) -> Result<TokenIter> {
        self.validate()?;
        let (m, seed) = (self.length, self.seed);
        Ok(match &self.kind {
            StreamKind::Zipf { s } => Box::new(zipf_stream(*s, m, seed)?.map(Ok)),
            StreamKind::TextFile { path } => Box::new(text_stream(path, TextFormat::Plain)?),
            StreamKind::BagOfWords { path } => Box::new(text_stream(path, TextFormat::UciBagOfWords)?),
            StreamKind::Nggp { sigma, alpha } => {
                let mut sampler = NggpSampler::new(*alpha, *sigma, seed)?;
                Box::new((0..m).map(move |_| sampler.advance().map(|b| b.to_string())))
            }
            StreamKind::Dp { beta } => {
                let mut sampler = DpSampler::new(*beta, seed)?;
                Box::new((0..m).map(move |_| Ok(sampler.advance().to_string())))
            }
        })
    }
}
