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

//! Batch evaluation: build sketches and exact counts from one pass over a
//! stream, calibrate the Bayesian estimators on the sketch alone, and
//! aggregate absolute errors by the bin of each token's true frequency.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alpha_estimation::{estimate_alpha, estimate_alpha_dp, AlphaEstimate};
use crate::error::{Error, Result};
use crate::posterior::partition::VTable;
use crate::posterior::{combine_rows, dp_log_pmf_range, NigpModel, NigpPmfCache, PosteriorPmf};
use crate::sketch::{estimate_cmm, estimate_cms, BucketVector, Sketch};
use crate::streams::{ExactCounter, NggpSampler, StreamKind, StreamSpec};

/// Default bin edges: (0,1], (1,2], (2,4], …, (128,256].
pub const DEFAULT_BIN_EDGES: [u64; 10] = [0, 1, 2, 4, 8, 16, 32, 64, 128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    Cms,
    Cmm,
    Dp,
    Nigp,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Cms, Estimator::Cmm, Estimator::Dp, Estimator::Nigp];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Cms => "cms",
            Estimator::Cmm => "cmm",
            Estimator::Dp => "dp",
            Estimator::Nigp => "nigp",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Estimator::Dp | Estimator::Nigp)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown estimator {s:?}; expected one of cms, cmm, dp, nigp")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub sketch_seed: u64,
    pub depth: usize,
    pub width: usize,
    pub estimators: Vec<Estimator>,
    /// Increasing edges starting at 0; bins are (e_i, e_{i+1}], and tokens above
    /// the last edge fall in an open-ended bin.
    pub bin_edges: Vec<u64>,
    pub eval_sample_per_bin: Option<usize>,
    pub sample_seed: u64,
    /// Number of hash seeds (sketch_seed, sketch_seed + 1, …) evaluated on the same stream.
    pub repeats: u32,
    pub credible_level: f64,
}

impl ExperimentConfig {
    pub fn new(stream: StreamSpec, depth: usize, width: usize) -> Self {
        ExperimentConfig {
            stream,
            sketch_seed: 0,
            depth,
            width,
            estimators: Estimator::ALL.to_vec(),
            bin_edges: DEFAULT_BIN_EDGES.to_vec(),
            eval_sample_per_bin: None,
            sample_seed: 0,
            repeats: 1,
            credible_level: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        if self.depth == 0 || self.width == 0 {
            return Err(Error::invalid("depth and width must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators enabled"));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::invalid("estimators listed more than once"));
        }
        if self.bin_edges.len() < 2 || self.bin_edges[0] != 0 || self.bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bin edges must start at 0 and strictly increase, with at least two edges"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.eval_sample_per_bin == Some(0) {
            return Err(Error::invalid("eval_sample_per_bin must be positive when set"));
        }
        if !(self.credible_level > 0.0 && self.credible_level < 1.0) {
            return Err(Error::invalid(format!("credible level must lie in (0, 1), got {}", self.credible_level)));
        }
        Ok(())
    }

    fn enabled(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    fn bin_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.bin_edges.windows(2).map(|w| format!("({},{}]", w[0], w[1])).collect();
        labels.push(format!(">{}", self.bin_edges[self.bin_edges.len() - 1]));
        labels
    }

    fn bin_of(&self, f: u64) -> usize {
        // f ≥ 1, so the index of the first edge ≥ f is the bin number + 1
        self.bin_edges.partition_point(|&e| e < f).max(1) - 1
    }
}

/// Estimates for one evaluated token under one hash seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    pub token: String,
    pub truth: u64,
    pub bin: usize,
    pub cms: u64,
    pub cmm: f64,
    pub dp: Option<f64>,
    pub nigp: Option<f64>,
    pub nigp_interval: Option<(u64, u64)>,
}

impl TokenRecord {
    pub fn estimate(&self, e: Estimator) -> Option<f64> {
        match e {
            Estimator::Cms => Some(self.cms as f64),
            Estimator::Cmm => Some(self.cmm),
            Estimator::Dp => self.dp,
            Estimator::Nigp => self.nigp,
        }
    }
}

/// Output of one hash seed.
#[derive(Debug, Clone)]
pub struct RepeatResult {
    pub sketch_seed: u64,
    pub alpha_nigp: Option<AlphaEstimate>,
    pub alpha_dp: Option<AlphaEstimate>,
    pub records: Vec<TokenRecord>,
}

#[derive(Debug, Clone)]
pub struct BinSummary {
    pub label: String,
    pub tokens: usize,
    /// Per enabled estimator: (mean over repeats of the MAE, sample sd over repeats).
    pub mae: Vec<(Estimator, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct MaeReport {
    pub config: ExperimentConfig,
    pub stream_length: u64,
    pub distinct_tokens: usize,
    pub bins: Vec<BinSummary>,
    pub repeats: Vec<RepeatResult>,
    pub wall_time: Duration,
}

impl MaeReport {
    pub fn mae(&self, bin_label: &str, e: Estimator) -> Option<f64> {
        self.bins.iter().find(|b| b.label == bin_label)?.mae.iter().find(|(x, _, _)| *x == e).map(|&(_, mean, _)| mean)
    }

    /// Per-token checks of NIGP mean ≤ CMS that fail, across all repeats.
    pub fn shrinkage_violations(&self) -> usize {
        self.repeats.iter().flat_map(|r| &r.records).filter(|t| t.nigp.is_some_and(|n| n > t.cms as f64)).count()
    }

    /// Machine-readable table; byte-identical for identical configs.
    pub fn to_csv(&self) -> String {
        let multi = self.repeats.len() > 1;
        let mut out = String::from("bin,tokens");
        for e in &self.config.estimators {
            let _ = write!(out, ",{e}");
            if multi {
                let _ = write!(out, ",{e}_sd");
            }
        }
        out.push('\n');
        for b in &self.bins {
            let _ = write!(out, "{},{}", b.label, b.tokens);
            for &(_, mean, sd) in &b.mae {
                let _ = write!(out, ",{}", fmt_num(mean));
                if multi {
                    let _ = write!(out, ",{}", fmt_num(sd));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Per-token estimates of the first repeat.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("token,truth,bin,cms,cmm,dp,nigp,nigp_low,nigp_high\n");
        let labels = self.config.bin_labels();
        for r in self.repeats.first().map_or(&[][..], |r| &r.records[..]) {
            let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
            let (lo, hi) =
                r.nigp_interval.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.token,
                r.truth,
                labels[r.bin],
                r.cms,
                fmt_num(r.cmm),
                opt(r.dp),
                opt(r.nigp),
                lo,
                hi
            );
        }
        out
    }

    /// Human-readable summary with run metadata.
    pub fn to_markdown(&self) -> String {
        let multi = self.repeats.len() > 1;
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "# MAE by true-frequency bin\n");
        let _ = writeln!(out, "- stream: {:?}, length {}, seed {}", c.stream.kind, self.stream_length, c.stream.seed);
        let _ = writeln!(
            out,
            "- sketch: depth {}, width {}, seeds {}..{}",
            c.depth,
            c.width,
            c.sketch_seed,
            c.sketch_seed + u64::from(c.repeats)
        );
        let _ = writeln!(out, "- distinct tokens: {}", self.distinct_tokens);
        for r in &self.repeats {
            if let Some(a) = &r.alpha_nigp {
                let _ = writeln!(out, "- seed {}: nigp alpha_hat = {:.4}", r.sketch_seed, a.alpha_hat);
            }
            if let Some(a) = &r.alpha_dp {
                let _ = writeln!(out, "- seed {}: dp alpha_hat = {:.4}", r.sketch_seed, a.alpha_hat);
            }
        }
        let _ = writeln!(out, "- wall time: {:.1} s\n", self.wall_time.as_secs_f64());
        let mut header = vec!["bin".to_string(), "tokens".to_string()];
        header.extend(c.estimators.iter().map(|e| e.to_string()));
        let rows: Vec<Vec<String>> = self
            .bins
            .iter()
            .map(|b| {
                let mut row = vec![b.label.clone(), b.tokens.to_string()];
                row.extend(b.mae.iter().map(|&(_, mean, sd)| {
                    if multi {
                        format!("{mean:.2} ± {sd:.2}")
                    } else {
                        format!("{mean:.2}")
                    }
                }));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(s, &w)| format!("{s:>w$}")).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        out.push_str(&line(&header));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<MaeReport> {
    config.validate()?;
    let started = Instant::now();
    let mut sketches = (0..config.repeats)
        .map(|r| Sketch::new(config.sketch_seed.wrapping_add(u64::from(r)), config.depth, config.width))
        .collect::<Result<Vec<_>>>()?;
    let mut counter = ExactCounter::new();
    for token in config.stream.tokens()? {
        let token = token?;
        for s in &mut sketches {
            s.update(token.as_bytes())?;
        }
        counter.add(&token);
    }
    let population = evaluation_population(config, &counter);
    let repeats = sketches.iter().map(|s| evaluate_sketch(config, s, &population)).collect::<Result<Vec<_>>>()?;
    let labels = config.bin_labels();
    let mut bins: Vec<BinSummary> =
        labels.iter().map(|l| BinSummary { label: l.clone(), tokens: 0, mae: Vec::new() }).collect();
    for &(_, _, bin) in &population {
        bins[bin].tokens += 1;
    }
    for (b, summary) in bins.iter_mut().enumerate() {
        for &e in &config.estimators {
            let per_repeat: Vec<f64> = repeats
                .iter()
                .map(|r| {
                    let errs: Vec<f64> = r
                        .records
                        .iter()
                        .filter(|t| t.bin == b)
                        .filter_map(|t| t.estimate(e).map(|x| (x - t.truth as f64).abs()))
                        .collect();
                    if errs.is_empty() {
                        f64::NAN
                    } else {
                        errs.iter().sum::<f64>() / errs.len() as f64
                    }
                })
                .collect();
            let n = per_repeat.len() as f64;
            let mean = per_repeat.iter().sum::<f64>() / n;
            let sd = if per_repeat.len() > 1 {
                (per_repeat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            summary.mae.push((e, mean, sd));
        }
    }
    Ok(MaeReport {
        config: config.clone(),
        stream_length: counter.total(),
        distinct_tokens: counter.distinct(),
        bins,
        repeats,
        wall_time: started.elapsed(),
    })
}

/// (token, truth, bin) for every distinct token, or a seeded sample per bin; sorted by token.
fn evaluation_population(config: &ExperimentConfig, counter: &ExactCounter) -> Vec<(String, u64, usize)> {
    let mut per_bin: BTreeMap<usize, Vec<(String, u64)>> = BTreeMap::new();
    for (token, f) in counter.sorted() {
        per_bin.entry(config.bin_of(f)).or_default().push((token.to_owned(), f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.sample_seed);
    let mut out = Vec::new();
    for (bin, tokens) in per_bin {
        match config.eval_sample_per_bin {
            Some(cap) if tokens.len() > cap => {
                let mut picks = sample(&mut rng, tokens.len(), cap).into_vec();
                picks.sort_unstable();
                out.extend(picks.into_iter().map(|i| (tokens[i].0.clone(), tokens[i].1, bin)));
            }
            _ => out.extend(tokens.into_iter().map(|(t, f)| (t, f, bin))),
        }
    }
    out.sort_unstable();
    out
}

/// Estimates for every population token from one sketch. The exact counts in
/// `population` are copied into the records but never reach the estimators.
fn evaluate_sketch(
    config: &ExperimentConfig,
    sketch: &Sketch,
    population: &[(String, u64, usize)],
) -> Result<RepeatResult> {
    let vectors: Vec<BucketVector> =
        population.iter().map(|(t, _, _)| sketch.bucket_vector(t.as_bytes())).collect::<Result<_>>()?;
    let mut requests: HashMap<u64, u64> = HashMap::new();
    for bv in &vectors {
        let bound = bv.min();
        for &c in &bv.values {
            let slot = requests.entry(c).or_insert(0);
            *slot = (*slot).max(bound);
        }
    }
    let mut requests: Vec<(u64, u64)> = requests.into_iter().collect();
    requests.sort_unstable();

    let want_nigp = config.enabled(Estimator::Nigp);
    let want_dp = config.enabled(Estimator::Dp);
    let alpha_nigp = if want_nigp { Some(estimate_alpha(sketch)?) } else { None };
    let alpha_dp = if want_dp { Some(estimate_alpha_dp(sketch)?) } else { None };

    let nigp_cache = match &alpha_nigp {
        Some(a) => {
            let model = NigpModel::new(a.alpha_hat, config.width)?;
            let mut cache = NigpPmfCache::new(model.bucket_mass())?;
            cache.ensure(&requests)?;
            Some(cache)
        }
        None => None,
    };
    let dp_cache: Option<HashMap<u64, Vec<f64>>> = match &alpha_dp {
        Some(a) => {
            let beta = a.alpha_hat / config.width as f64;
            Some(
                requests
                    .par_iter()
                    .map(|&(c, upto)| dp_log_pmf_range(c, upto, beta).map(|v| (c, v)))
                    .collect::<Result<_>>()?,
            )
        }
        None => None,
    };

    let records = population
        .par_iter()
        .zip(&vectors)
        .map(|((token, truth, bin), bv)| {
            let mut record = TokenRecord {
                token: token.clone(),
                truth: *truth,
                bin: *bin,
                cms: estimate_cms(bv),
                cmm: estimate_cmm(bv, sketch.total(), sketch.width()),
                dp: None,
                nigp: None,
                nigp_interval: None,
            };
            if let Some(cache) = &nigp_cache {
                let pmf = posterior(bv, |c| cache.get(c).expect("cache warmed for every bucket"))?;
                record.nigp = Some(pmf.mean());
                record.nigp_interval = Some(pmf.credible_interval(config.credible_level));
            }
            if let Some(cache) = &dp_cache {
                record.dp = Some(posterior(bv, |c| cache[&c].as_slice())?.mean());
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatResult { sketch_seed: sketch.seed(), alpha_nigp, alpha_dp, records })
}

fn posterior<'a>(bv: &BucketVector, table: impl Fn(u64) -> &'a [f64]) -> Result<PosteriorPmf> {
    combine_rows(bv.values.iter().map(|&c| table(c)), bv.min())
}

/// Mean growth curve K_m and multiplicity profile M_r/K over repeated partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerlawDiagnostics {
    /// (m, mean K_m, sd K_m) at each checkpoint.
    pub growth: Vec<(u64, f64, f64)>,
    /// (r, mean M_r/K_m, sd) at the final length.
    pub profile: Vec<(u64, f64, f64)>,
}

impl PowerlawDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x,mean,sd\n");
        for &(m, mean, sd) in &self.growth {
            let _ = writeln!(out, "growth,{m},{},{}", fmt_num(mean), fmt_num(sd));
        }
        for &(r, mean, sd) in &self.profile {
            let _ = writeln!(out, "profile,{r},{},{}", fmt_num(mean), fmt_num(sd));
        }
        out
    }

    /// Least-squares slope of ln K_m on ln m over checkpoints in [lo, hi].
    pub fn growth_slope(&self, lo: u64, hi: u64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .growth
            .iter()
            .filter(|&&(m, k, _)| m >= lo && m <= hi && k > 0.0)
            .map(|&(m, k, _)| ((m as f64).ln(), k.ln()))
            .collect();
        log_log_slope(&pts)
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let sxx: f64 = points.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `grid` log-spaced checkpoints from 10 (or 1 when m < 10) to m inclusive.
pub fn checkpoint_grid(m: u64, grid: usize) -> Vec<u64> {
    let lo = if m >= 10 { 10f64 } else { 1.0 };
    let mut points: Vec<u64> = (0..grid)
        .map(|i| {
            let t = if grid == 1 { 1.0 } else { i as f64 / (grid - 1) as f64 };
            (lo * (m as f64 / lo).powf(t)).round() as u64
        })
        .collect();
    if let Some(last) = points.last_mut() {
        *last = m;
    }
    points
}

/// Runs `repeats` partitions (seeds spec.seed, spec.seed + 1, …) of length
/// spec.length and summarizes K_m at `grid` checkpoints and M_r/K for r ≤ max_r.
pub fn diagnostics_powerlaw(spec: &StreamSpec, repeats: u32, grid: usize, max_r: u64) -> Result<PowerlawDiagnostics> {
    spec.validate()?;
    if repeats == 0 || grid == 0 || spec.length == 0 {
        return Err(Error::invalid("repeats, grid size and length must be positive"));
    }
    let checkpoints = checkpoint_grid(spec.length, grid);
    let mut growth_runs: Vec<Vec<f64>> = Vec::new();
    let mut profile_runs: Vec<Vec<f64>> = Vec::new();
    let mut table = match spec.kind {
        StreamKind::Nggp { sigma, alpha } => Some(VTable::new(alpha, sigma)?),
        StreamKind::Dp { .. } => None,
        _ => return Err(Error::invalid("power-law diagnostics need an nggp or dp stream")),
    };
    for rep in 0..repeats {
        let seed = spec.seed.wrapping_add(u64::from(rep));
        let mut ks = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        let stats = match (&spec.kind, table.take()) {
            (StreamKind::Nggp { .. }, Some(t)) => {
                let mut s = NggpSampler::with_table(t, seed);
                for i in 1..=spec.length {
                    s.advance()?;
                    while next < checkpoints.len() && checkpoints[next] == i {
                        ks.push(s.blocks() as f64);
                        next += 1;
                    }
                }
                let stats = s.stats();
                table = Some(s.into_table());
                stats
            }
            (StreamKind::Dp { beta }, _) => {
                let mut s = crate::streams::DpSampler::new(*beta, seed)?;
                for i in 1..=spec.length {
                    s.advance();
                    while next < checkpoints.len() && checkpoints[next] == i {
                        ks.push(s.blocks() as f64);
                        next += 1;
                    }
                }
                s.stats()
            }
            _ => unreachable!("kind checked above"),
        };
        let k = stats.k as f64;
        profile_runs.push((1..=max_r).map(|r| stats.multiplicity(r) as f64 / k).collect());
        growth_runs.push(ks);
    }
    let summarize = |runs: &[Vec<f64>], i: usize| {
        let xs: Vec<f64> = runs.iter().map(|r| r[i]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd =
            if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        (mean, sd)
    };
    Ok(PowerlawDiagnostics {
        growth: checkpoints
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let (mean, sd) = summarize(&growth_runs, i);
                (m, mean, sd)
            })
            .collect(),
        profile: (1..=max_r)
            .map(|r| {
                let (mean, sd) = summarize(&profile_runs, r as usize - 1);
                (r, mean, sd)
            })
            .collect(),
    })
}
