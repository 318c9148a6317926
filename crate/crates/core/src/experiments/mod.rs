//! Monte Carlo harness.
//!
//! An experiment is a config plus a kind. The config's grid axes expand into
//! cells; each cell runs `trials` independent trials. Trial `t` of cell `c`
//! draws everything from `split_seed(split_seed(master, c), t)`, so results
//! do not depend on scheduling. Trials run on the rayon pool and are
//! collected in index order.
//!
//! Output is one CSV row per trial record (the last column, `elapsed_us`, is
//! the only non-deterministic one) and a JSON summary with the config echo
//! and per-cell aggregates.

mod attack;
mod config;
mod decoder;
mod rank;
mod shared;
pub mod stats;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

pub use attack::run_attack_campaign;
pub use config::{
    AttackKind, BoundKind, Cell, DecoderKind, DegreeKindConfig, DistKind, ExperimentConfig, ExperimentKind, HeaderKind, MaskKind, ModelKind,
};
pub use decoder::run_decoder_benchmark;
pub use rank::run_rank_experiment;
pub use shared::run_shared_value_scenario;

use crate::rng::{rng_from_seed, split_seed, CodeRng};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub values: Vec<String>,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Names of the per-experiment columns between `seed` and `elapsed_us`.
    pub columns: Vec<&'static str>,
    pub records: Vec<TrialRecord>,
    /// One JSON object per cell.
    pub cells: Vec<Value>,
}

impl ExperimentReport {
    fn header(&self) -> Vec<&str> {
        let mut h = vec!["cell", "trial", "seed"];
        h.extend(self.columns.iter().copied());
        h.push("elapsed_us");
        h
    }

    fn write_csv_to<W: std::io::Write>(&self, w: W, with_timing: bool) -> Result<(), ExperimentError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.header();
        if !with_timing {
            header.pop();
        }
        out.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.cell.to_string(), r.trial.to_string(), r.seed.to_string()];
            row.extend(r.values.iter().cloned());
            if with_timing {
                row.push(r.elapsed_us.to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        self.write_csv_to(std::fs::File::create(path)?, true)
    }

    /// The CSV without the timing column; identical across re-runs.
    pub fn outcome_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf, false).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn summary(&self) -> Value {
        json!({
            "experiment": self.kind.name(),
            "config": self.config,
            "seed_derivation": "trial seed = split_seed(split_seed(master, cell), trial); split_seed is SplitMix64",
            "cells": self.cells,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Writes `<kind>.csv` and `<kind>.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(&dir.join(format!("{}.csv", self.kind.name())))?;
        self.write_json(&dir.join(format!("{}.json", self.kind.name())))
    }

    pub fn cell(&self, i: usize) -> &Value {
        &self.cells[i]
    }
}

pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    match kind {
        ExperimentKind::Rank => run_rank_experiment(config),
        ExperimentKind::Attack => run_attack_campaign(config),
        ExperimentKind::Decoder => run_decoder_benchmark(config),
        ExperimentKind::SharedValue => run_shared_value_scenario(config),
    }
}

pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    split_seed(split_seed(master, cell as u64), trial as u64)
}

/// Output of one trial before formatting.
struct Timed<T> {
    trial: usize,
    seed: u64,
    value: T,
    elapsed_us: u64,
}

/// Runs every trial of one cell in parallel, in trial order.
fn run_cell<T, F>(config: &ExperimentConfig, cell: usize, f: F) -> Vec<Timed<T>>
where
    T: Send,
    F: Fn(&mut CodeRng) -> T + Sync,
{
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config.seed, cell, trial);
            let mut rng = rng_from_seed(seed);
            let start = Instant::now();
            let value = f(&mut rng);
            Timed {
                trial,
                seed,
                value,
                elapsed_us: start.elapsed().as_micros() as u64,
            }
        })
        .collect()
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

/// Rate, 95% Wilson interval and the raw counts.
fn rate_json(successes: usize, trials: usize) -> Value {
    let (lo, hi) = stats::wilson_interval(successes, trials, stats::Z95);
    json!({
        "count": successes,
        "trials": trials,
        "rate": if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        "wilson95": [lo, hi],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(ExperimentConfig::from_toml_str("k = [8]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("k = [8]\nadversary = \"sneaky:online\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("c = \"1/2\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("dist = \"bernoulli\"\n").is_err());
        let cfg = ExperimentConfig::from_toml_str("k = [8, 10]\nepsilon = [2, 4]\ntrials = 3\n").unwrap();
        assert_eq!(cfg.cells().len(), 4);
        assert_eq!(cfg.trials, 3);
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(7, 0, 0), split_seed(split_seed(7, 0), 0));
        assert_ne!(trial_seed(7, 0, 1), trial_seed(7, 1, 0));
    }

    #[test]
    fn reruns_are_identical() {
        let toml = "k = [8]\nepsilon = [2]\nf = [1]\ntrials = 12\nseed = 5\n";
        let cfg = ExperimentConfig::from_toml_str(toml).unwrap();
        for kind in [ExperimentKind::Rank, ExperimentKind::Attack, ExperimentKind::Decoder, ExperimentKind::SharedValue] {
            let a = run_experiment(kind, &cfg).unwrap();
            let b = run_experiment(kind, &cfg).unwrap();
            assert_eq!(a.outcome_csv(), b.outcome_csv(), "{kind:?}");
            assert_eq!(a.cells, b.cells);
        }
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml_str("k = [6]\nepsilon = [0, 3]\ntrials = 5\n").unwrap();
        let rep = run_experiment(ExperimentKind::Rank, &cfg).unwrap();
        rep.write_to_dir(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("rank.csv")).unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.lines().next().unwrap().ends_with(",elapsed_us"));
        let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rank.json")).unwrap()).unwrap();
        assert_eq!(json["cells"].as_array().unwrap().len(), 2);
        assert_eq!(json["config"]["trials"], 5);
    }
}
