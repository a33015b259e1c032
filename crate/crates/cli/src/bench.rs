//! Multi-seed fit/score/evaluate runs over several datasets.

use std::path::Path;
use std::time::Instant;

use anomix::dataset::{split_inductive, Dataset, SplitSpec};
use anomix::eval::{aggregate, evaluate, Aggregate, RunRecord};
use anomix::scoring::ScoreMode;
use anomix::trainer::{fit, score_inductive, Ablation};
use anomix::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::commands::{csv_files, load_dataset, write_atomic};
use crate::error::CliError;

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub fit_seconds: f64,
    pub infer_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub aggregate: Aggregate,
}

/// Training configuration for a named method: `vector` or `scalar` select the
/// score mode, an ablation name switches that component off.
pub fn method_config(base: &TrainConfig, method: &str) -> Result<TrainConfig, CliError> {
    let mut config = base.clone();
    match method {
        "vector" => config.score_mode = ScoreMode::Vector,
        "scalar" => config.score_mode = ScoreMode::Scalar,
        other => {
            config.ablation = Ablation::parse(other).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    Ok(config)
}

/// Runs every method on every dataset for every seed. Each run splits the
/// dataset 70/30 (stratified, split seed = run seed), fits on the first part
/// and evaluates inductive scores on the second.
pub fn run_bench(
    datasets: &[Dataset],
    base: &TrainConfig,
    methods: &[String],
    seeds: &[u64],
) -> Result<BenchReport, CliError> {
    let mut records = Vec::new();
    for ds in datasets {
        if ds.labels.is_none() {
            return Err(CliError::Data(format!("dataset {} has no label column", ds.name)));
        }
        for method in methods {
            let config = method_config(base, method)?;
            for &seed in seeds {
                let spec = SplitSpec {
                    train_fraction: TRAIN_FRACTION,
                    seed,
                    stratified: true,
                };
                let (train, test) = split_inductive(ds, &spec)?;
                let config = TrainConfig { seed, ..config.clone() };
                let started = Instant::now();
                let out = fit(&train, &config)?;
                let fit_seconds = started.elapsed().as_secs_f64();
                let started = Instant::now();
                let scores = score_inductive(&out.model, &test)?;
                let infer_seconds = started.elapsed().as_secs_f64();
                let labels = test.labels.as_deref().expect("labels checked above");
                let report = evaluate(&scores.scores, labels, seed)?;
                records.push(BenchRecord {
                    dataset: ds.name.clone(),
                    method: method.clone(),
                    seed,
                    auc_roc: report.auc_roc,
                    auc_pr: report.auc_pr,
                    n_train: train.n_rows(),
                    n_test: test.n_rows(),
                    fit_seconds,
                    infer_seconds,
                });
            }
        }
    }
    let runs: Vec<RunRecord> = records
        .iter()
        .map(|r| RunRecord {
            dataset: r.dataset.clone(),
            method: r.method.clone(),
            seed: r.seed,
            auc_roc: r.auc_roc,
            auc_pr: r.auc_pr,
        })
        .collect();
    let aggregate = aggregate(&runs)?;
    Ok(BenchReport { records, aggregate })
}

/// Benchmarks every CSV in `dir` and optionally writes the report as JSON.
pub fn cmd_bench(
    dir: &Path,
    label_column: &str,
    base: &TrainConfig,
    methods: &[String],
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<BenchReport, CliError> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no CSV files in {}", dir.display())));
    }
    let datasets = files
        .iter()
        .map(|p| load_dataset(p, label_column))
        .collect::<Result<Vec<_>, _>>()?;
    let report = run_bench(&datasets, base, methods, seeds)?;
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(report)
}
