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

//! Flat TOML experiment configuration.
//!
//! Keys (all optional unless the stream needs them):
//!
//! | key                   | meaning                                             |
//! |-----------------------|-----------------------------------------------------|
//! | `stream`              | `zipf`, `text`, `bagofwords`, `nggp` or `dp`        |
//! | `zipf_s`              | Zipf exponent (> 1)                                 |
//! | `nggp_sigma`          | NGGP stability in (0, 1)                            |
//! | `nggp_alpha`          | NGGP mass                                           |
//! | `dp_beta`             | DP mass                                             |
//! | `input`               | corpus path for `text` / `bagofwords`               |
//! | `length`              | tokens to draw from sampled streams                 |
//! | `stream_seed`         | stream seed                                         |
//! | `sketch_seed`         | first hash seed                                     |
//! | `depth`, `width`      | sketch rows N and buckets per row J                 |
//! | `estimators`          | subset of `["cms", "cmm", "dp", "nigp"]`            |
//! | `bin_edges`           | increasing edges starting at 0                      |
//! | `eval_sample_per_bin` | cap on evaluated tokens per bin                     |
//! | `sample_seed`         | seed of the per-bin sample                          |
//! | `repeats`             | number of hash seeds                                |
//! | `credible_level`      | level of the NIGP credible interval                 |
//! | `csv_output`          | MAE table as CSV                                    |
//! | `markdown_output`     | MAE table as markdown                               |
//! | `tokens_output`       | per-token estimates as CSV                          |
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use nigp_cms::experiment::{Estimator, ExperimentConfig, DEFAULT_BIN_EDGES};
use nigp_cms::streams::{StreamKind, StreamSpec};
use nigp_cms::{Error, Result};
use serde::Deserialize;

pub(crate) fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub stream: Option<String>,
    pub zipf_s: Option<f64>,
    pub nggp_sigma: Option<f64>,
    pub nggp_alpha: Option<f64>,
    pub dp_beta: Option<f64>,
    pub input: Option<PathBuf>,
    pub length: Option<u64>,
    pub stream_seed: Option<u64>,
    pub sketch_seed: Option<u64>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub estimators: Option<Vec<String>>,
    pub bin_edges: Option<Vec<u64>>,
    pub eval_sample_per_bin: Option<usize>,
    pub sample_seed: Option<u64>,
    pub repeats: Option<u32>,
    pub credible_level: Option<f64>,
    pub csv_output: Option<PathBuf>,
    pub markdown_output: Option<PathBuf>,
    pub tokens_output: Option<PathBuf>,
}

/// Where to write the reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
    pub tokens: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut file = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.input, &mut file.csv_output, &mut file.markdown_output, &mut file.tokens_output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse { line, message: e.message().to_owned() }
        })
    }

    /// Fields set in `other` replace those set here.
    pub fn overridden_by(self, other: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigFile { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            stream,
            zipf_s,
            nggp_sigma,
            nggp_alpha,
            dp_beta,
            input,
            length,
            stream_seed,
            sketch_seed,
            depth,
            width,
            estimators,
            bin_edges,
            eval_sample_per_bin,
            sample_seed,
            repeats,
            credible_level,
            csv_output,
            markdown_output,
            tokens_output
        )
    }

    pub fn build(&self) -> Result<(ExperimentConfig, Outputs)> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(format!("missing config key `{key}`")));
        let path = || self.input.clone().ok_or_else(|| invalid("missing config key `input`"));
        let kind = match self.stream.as_deref().unwrap_or("zipf") {
            "zipf" => StreamKind::Zipf { s: need(self.zipf_s, "zipf_s")? },
            "text" => StreamKind::TextFile { path: path()? },
            "bagofwords" => StreamKind::BagOfWords { path: path()? },
            "nggp" => StreamKind::Nggp {
                sigma: need(self.nggp_sigma, "nggp_sigma")?,
                alpha: need(self.nggp_alpha, "nggp_alpha")?,
            },
            "dp" => StreamKind::Dp { beta: need(self.dp_beta, "dp_beta")? },
            other => return Err(invalid(format!("unknown stream kind {other:?}"))),
        };
        let sampled = matches!(kind, StreamKind::Zipf { .. } | StreamKind::Nggp { .. } | StreamKind::Dp { .. });
        let length = match self.length {
            Some(m) => m,
            None if sampled => return Err(invalid("missing config key `length`")),
            None => 0,
        };
        let stream = StreamSpec { kind, length, seed: self.stream_seed.unwrap_or(0) };
        let mut config = ExperimentConfig::new(stream, self.depth.unwrap_or(4), self.width.unwrap_or(160));
        config.sketch_seed = self.sketch_seed.unwrap_or(0);
        if let Some(list) = &self.estimators {
            config.estimators = list.iter().map(|s| s.parse::<Estimator>()).collect::<Result<_>>()?;
        }
        config.bin_edges = self.bin_edges.clone().unwrap_or_else(|| DEFAULT_BIN_EDGES.to_vec());
        config.eval_sample_per_bin = self.eval_sample_per_bin;
        config.sample_seed = self.sample_seed.unwrap_or(0);
        config.repeats = self.repeats.unwrap_or(1);
        config.credible_level = self.credible_level.unwrap_or(0.95);
        config.validate()?;
        let outputs = Outputs {
            csv: self.csv_output.clone(),
            markdown: self.markdown_output.clone(),
            tokens: self.tokens_output.clone(),
        };
        Ok((config, outputs))
    }
}
