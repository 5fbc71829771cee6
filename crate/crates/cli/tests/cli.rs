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

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nigp-cms"))
}

fn run_with_stdin(mut cmd: Command, input: &str) -> Output {
    let mut child = cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn build_sketch(dir: &Path, corpus: &str, calibrate: bool) -> std::path::PathBuf {
    let input = dir.join("corpus.txt");
    std::fs::write(&input, corpus).unwrap();
    let out = dir.join("corpus.cms");
    let mut cmd = cli();
    cmd.args(["sketch", "build", "--seed", "3", "--depth", "3", "--width", "32", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&out);
    if calibrate {
        cmd.arg("--calibrate");
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out
}

fn corpus() -> String {
    let mut text = String::new();
    for i in 1..=60u32 {
        for _ in 0..(120 / i) {
            text.push_str(&format!("word{i} "));
        }
        text.push('\n');
    }
    text
}

#[test]
fn build_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let sketch = build_sketch(dir.path(), &corpus(), false);
    let mut cmd = cli();
    cmd.args(["sketch", "query", "--alpha", "20", "--sketch"]).arg(&sketch);
    let out = run_with_stdin(cmd, "word1\nword7\nnever-seen-token\n");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "token\tcms\tcmm\tnigp_mean\tnigp_median\tnigp_mode\tci_low\tci_high");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split('\t').collect();
        let cms: f64 = f[1].parse().unwrap();
        let mean: f64 = f[3].parse().unwrap();
        assert!(mean <= cms);
        let (lo, hi): (u64, u64) = (f[6].parse().unwrap(), f[7].parse().unwrap());
        assert!(lo <= hi && hi as f64 <= cms);
    }
    let word1: Vec<&str> = lines[1].split('\t').collect();
    assert!(word1[1].parse::<u64>().unwrap() >= 120);

    let mut again = cli();
    again.args(["sketch", "query", "--alpha", "20", "--sketch"]).arg(&sketch);
    assert_eq!(run_with_stdin(again, "word1\nword7\nnever-seen-token\n").stdout, text.as_bytes());
}

#[test]
fn unseen_token_with_empty_bucket_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let sketch = build_sketch(dir.path(), "alpha\n", false);
    let mut cmd = cli();
    cmd.args(["sketch", "query", "--alpha", "1.5", "--sketch"]).arg(&sketch);
    // with one distinct token ingested, a different token misses it in some row
    // unless every row collides; pick any token whose minimum bucket is zero
    let candidates: String = (0..50).map(|i| format!("probe{i}\n")).collect();
    let out = run_with_stdin(cmd, &candidates);
    let text = String::from_utf8(out.stdout).unwrap();
    let zero_rows: Vec<&str> = text.lines().skip(1).filter(|l| l.split('\t').nth(1) == Some("0")).collect();
    assert!(!zero_rows.is_empty());
    for row in zero_rows {
        let f: Vec<&str> = row.split('\t').collect();
        assert_eq!(&f[1..], ["0", "0", "0.000000", "0", "0", "0", "0"]);
    }
}

#[test]
fn calibration_is_stored_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let sketch = build_sketch(dir.path(), &corpus(), true);
    let stored = std::fs::read_to_string(format!("{}.alpha", sketch.display())).unwrap();
    assert!(stored.trim().parse::<f64>().unwrap() > 0.0);
    let mut cmd = cli();
    cmd.args(["sketch", "query", "--sketch"]).arg(&sketch);
    let out = run_with_stdin(cmd, "word2\n");
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("token\tcms\tcmm\tnigp_mean"));
}

#[test]
fn corrupt_sketch_and_bad_config_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.cms");
    std::fs::write(&bogus, b"NOPE-not-a-sketch").unwrap();
    let mut cmd = cli();
    cmd.args(["sketch", "query", "--alpha", "1", "--sketch"]).arg(&bogus);
    assert_eq!(run_with_stdin(cmd, "x\n").status.code(), Some(2));

    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "stream = \"zipf\"\nzipf_s = 0.5\nlength = 10\n").unwrap();
    let out = cli().args(["experiment", "run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&config, "stream = \"zipf\"\nunknown_key = 1\n").unwrap();
    let out = cli().args(["experiment", "run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_csv_is_reproducible_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        "stream = \"zipf\"\nzipf_s = 1.6\nlength = 4000\nstream_seed = 2\ndepth = 3\nwidth = 40\n\
         estimators = [\"cms\", \"cmm\", \"nigp\"]\ncsv_output = \"first.csv\"\nmarkdown_output = \"first.md\"\n",
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let out = cli().args(["experiment", "run", "--config"]).arg(&config).args(extra).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&[]);
    let second = dir.path().join("second.csv");
    run(&["--csv-output", second.to_str().unwrap()]);
    let first = std::fs::read_to_string(dir.path().join("first.csv")).unwrap();
    assert_eq!(first, std::fs::read_to_string(&second).unwrap());
    assert!(first.starts_with("bin,tokens,cms,cmm,nigp\n"));
    assert!(std::fs::read_to_string(dir.path().join("first.md")).unwrap().contains("nigp alpha_hat"));

    let third = dir.path().join("third.csv");
    run(&["--estimators", "cms", "--csv-output", third.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&third).unwrap().starts_with("bin,tokens,cms\n"));
}

#[test]
fn powerlaw_diagnostics_csv() {
    let out = cli()
        .args([
            "diagnose",
            "powerlaw",
            "--sigma",
            "0.5",
            "--alpha",
            "1",
            "--m",
            "500",
            "--repeats",
            "2",
            "--grid",
            "6",
            "--max-r",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("series,x,mean,sd"));
    assert_eq!(text.lines().filter(|l| l.starts_with("growth,")).count(), 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("profile,")).count(), 4);
    let dp = cli()
        .args(["diagnose", "powerlaw", "--sigma", "0", "--alpha", "2", "--m", "300", "--repeats", "2", "--grid", "3"])
        .output()
        .unwrap();
    assert!(dp.status.success());
    let bad = cli().args(["diagnose", "powerlaw", "--sigma", "1.5", "--alpha", "1", "--m", "10"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
