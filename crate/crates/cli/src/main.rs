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

//! `nigp-cms` command-line entry point.

mod config;

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nigp_cms::alpha_estimation::estimate_alpha;
use nigp_cms::experiment::{diagnostics_powerlaw, run_experiment};
use nigp_cms::posterior::{nigp_sketch_posterior, NigpModel};
use nigp_cms::sketch::{estimate_cmm, estimate_cms, Sketch};
use nigp_cms::streams::{text_stream, StreamKind, StreamSpec, TextFormat};
use nigp_cms::Result;

use crate::config::{invalid, ConfigFile};

#[derive(Parser)]
#[command(name = "nigp-cms", version, about = "Count-min sketches with Bayesian nonparametric point queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch MAE experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Build and query sketch files.
    #[command(subcommand)]
    Sketch(SketchCommand),
    /// Partition-sampler diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run an experiment described by a config file; flags override file keys.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stream: Option<String>,
    #[arg(long)]
    zipf_s: Option<f64>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    length: Option<u64>,
    #[arg(long)]
    stream_seed: Option<u64>,
    #[arg(long)]
    sketch_seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Comma-separated subset of cms,cmm,dp,nigp.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long)]
    eval_sample_per_bin: Option<usize>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    csv_output: Option<PathBuf>,
    #[arg(long)]
    markdown_output: Option<PathBuf>,
    #[arg(long)]
    tokens_output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Plain,
    Uci,
}

#[derive(Subcommand)]
enum SketchCommand {
    /// Ingest a corpus into a new sketch file.
    Build {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 160)]
        width: usize,
        /// Corpus path, or `-` for standard input.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Plain)]
        format: InputFormat,
        #[arg(long)]
        output: PathBuf,
        /// Also estimate alpha and store it next to the sketch as `<output>.alpha`.
        #[arg(long)]
        calibrate: bool,
    },
    /// Answer point queries for tokens read one per line from standard input.
    Query {
        #[arg(long)]
        sketch: PathBuf,
        /// NIGP mass; defaults to the stored calibration if present.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Block-count growth and multiplicity profile of sampled partitions as CSV.
    /// With `--sigma 0` the DP with mass alpha/2 (the sigma → 0 limit) is used.
    Powerlaw {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 20)]
        repeats: u32,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 10)]
        max_r: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Experiment(ExperimentCommand::Run(args)) => experiment(args),
        Command::Sketch(SketchCommand::Build { seed, depth, width, input, format, output, calibrate }) => {
            build(seed, depth, width, &input, format, &output, calibrate)
        }
        Command::Sketch(SketchCommand::Query { sketch, alpha, level }) => query(&sketch, alpha, level),
        Command::Diagnose(DiagnoseCommand::Powerlaw { sigma, alpha, m, repeats, grid, max_r, seed, output }) => {
            let kind =
                if sigma == 0.0 { StreamKind::Dp { beta: alpha / 2.0 } } else { StreamKind::Nggp { sigma, alpha } };
            let report = diagnostics_powerlaw(&StreamSpec { kind, length: m, seed }, repeats, grid, max_r)?;
            emit(output.as_deref(), &report.to_csv())
        }
    }
}

fn experiment(args: RunArgs) -> Result<()> {
    let overrides = ConfigFile {
        stream: args.stream,
        zipf_s: args.zipf_s,
        input: args.input,
        length: args.length,
        stream_seed: args.stream_seed,
        sketch_seed: args.sketch_seed,
        depth: args.depth,
        width: args.width,
        estimators: args.estimators,
        eval_sample_per_bin: args.eval_sample_per_bin,
        repeats: args.repeats,
        csv_output: args.csv_output,
        markdown_output: args.markdown_output,
        tokens_output: args.tokens_output,
        ..ConfigFile::default()
    };
    let (config, outputs) = ConfigFile::load(&args.config)?.overridden_by(overrides).build()?;
    let report = run_experiment(&config)?;
    if let Some(path) = &outputs.csv {
        std::fs::write(path, report.to_csv())?;
    }
    if let Some(path) = &outputs.tokens {
        std::fs::write(path, report.records_csv())?;
    }
    match &outputs.markdown {
        Some(path) => std::fs::write(path, report.to_markdown())?,
        None => print!("{}", report.to_markdown()),
    }
    Ok(())
}

fn alpha_sidecar(sketch: &Path) -> PathBuf {
    let mut name = sketch.as_os_str().to_owned();
    name.push(".alpha");
    PathBuf::from(name)
}

fn build(
    seed: u64,
    depth: usize,
    width: usize,
    input: &Path,
    format: InputFormat,
    output: &Path,
    calibrate: bool,
) -> Result<()> {
    let format = match format {
        InputFormat::Plain => TextFormat::Plain,
        InputFormat::Uci => TextFormat::UciBagOfWords,
    };
    let mut sketch = Sketch::new(seed, depth, width)?;
    let mut ingest = |tokens: &mut dyn Iterator<Item = Result<String>>| -> Result<()> {
        for token in tokens {
            sketch.update(token?.as_bytes())?;
        }
        Ok(())
    };
    if input == Path::new("-") {
        ingest(&mut nigp_cms::streams::TextStream::new(io::stdin().lock(), format))?;
    } else {
        ingest(&mut text_stream(input, format)?)?;
    }
    sketch.write_to(output)?;
    if calibrate {
        let estimate = estimate_alpha(&sketch)?;
        std::fs::write(alpha_sidecar(output), format!("{}\n", estimate.alpha_hat))?;
        eprintln!("alpha_hat = {}", estimate.alpha_hat);
    }
    eprintln!("ingested {} tokens into {}", sketch.total(), output.display());
    Ok(())
}

fn query(path: &Path, alpha: Option<f64>, level: f64) -> Result<()> {
    let sketch = Sketch::read_from(path)?;
    let alpha = match alpha {
        Some(a) => Some(a),
        None => match std::fs::read_to_string(alpha_sidecar(path)) {
            Ok(text) => Some(text.trim().parse::<f64>().map_err(|e| invalid(format!("bad stored alpha: {e}")))?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        },
    };
    let model = alpha.map(|a| NigpModel::new(a, sketch.width())).transpose()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("credible level must lie in (0, 1), got {level}")));
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut header = String::from("token\tcms\tcmm");
    if model.is_some() {
        header.push_str("\tnigp_mean\tnigp_median\tnigp_mode\tci_low\tci_high");
    }
    writeln!(out, "{header}")?;
    for line in io::stdin().lock().lines() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let bv = sketch.bucket_vector(token.as_bytes())?;
        write!(out, "{token}\t{}\t{}", estimate_cms(&bv), estimate_cmm(&bv, sketch.total(), sketch.width()))?;
        if let Some(model) = &model {
            let pmf = nigp_sketch_posterior(&bv, model)?;
            let (lo, hi) = pmf.credible_interval(level);
            write!(out, "\t{:.6}\t{}\t{}\t{lo}\t{hi}", pmf.mean(), pmf.median(), pmf.mode())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
