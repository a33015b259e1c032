//! Ranking metrics and multi-run aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {l} is not 0 or 1")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((n_pos, labels.len() - n_pos))
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability that
/// a random positive outscores a random negative, counting ties as one half.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "AUC-ROC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the U statistic, kept integral so the result is exact.
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos as u64 * n_neg as u64) as f64)
}

/// Average precision: rows ranked by descending score (ties by ascending
/// index), precision summed at each positive's rank, divided by the number of
/// positives.
pub fn auc_pr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, _) = check_inputs(scores, labels)?;
    if n_pos == 0 {
        return Err(Error::InvalidArgument("AUC-PR needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
}

pub fn evaluate(scores: &[f64], labels: &[u8], seed: u64) -> Result<MetricReport> {
    let auc_roc = auc_roc(scores, labels)?;
    let auc_pr = auc_pr(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(MetricReport {
        auc_roc,
        auc_pr,
        n_pos,
        n_neg: labels.len() - n_pos,
        seed,
    })
}

/// One evaluated run of one method on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

impl RunRecord {
    pub fn new(dataset: impl Into<String>, method: impl Into<String>, report: &MetricReport) -> Self {
        Self {
            dataset: dataset.into(),
            method: method.into(),
            seed: report.seed,
            auc_roc: report.auc_roc,
            auc_pr: report.auc_pr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub dataset: String,
    pub method: String,
    pub runs: usize,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cells: Vec<CellMean>,
    /// Mean rank per method across datasets (1 = best).
    pub avg_rank_auc_roc: BTreeMap<String, f64>,
    pub avg_rank_auc_pr: BTreeMap<String, f64>,
}

/// Ranks `values` descending, 1 = best, tied values share the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]].total_cmp(&values[order[i]]).is_eq() {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Means each (dataset, method) cell over its seeds, ranks methods within each
/// dataset, and averages the ranks across datasets. Every method must appear on
/// every dataset with the same number of runs.
pub fn aggregate(runs: &[RunRecord]) -> Result<Aggregate> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    if let Some(r) = runs.iter().find(|r| !r.auc_roc.is_finite() || !r.auc_pr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite metric for method {:?} on dataset {:?}",
            r.method, r.dataset
        )));
    }
    let mut cells: BTreeMap<(&str, &str), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        cells.entry((&r.dataset, &r.method)).or_default().push(r);
    }
    let datasets: BTreeSet<&str> = runs.iter().map(|r| r.dataset.as_str()).collect();
    let methods: BTreeSet<&str> = runs.iter().map(|r| r.method.as_str()).collect();
    let expected_runs = cells.values().next().map(Vec::len).unwrap_or(0);

    let mut means = Vec::new();
    for &ds in &datasets {
        for &m in &methods {
            let cell = cells.get(&(ds, m)).ok_or_else(|| {
                Error::InvalidArgument(format!("missing runs for method {m:?} on dataset {ds:?}"))
            })?;
            if cell.len() != expected_runs {
                return Err(Error::InvalidArgument(format!(
                    "method {m:?} on {ds:?} has {} runs, expected {expected_runs}",
                    cell.len()
                )));
            }
            let k = cell.len() as f64;
            means.push(CellMean {
                dataset: ds.to_string(),
                method: m.to_string(),
                runs: cell.len(),
                auc_roc: cell.iter().map(|r| r.auc_roc).sum::<f64>() / k,
                auc_pr: cell.iter().map(|r| r.auc_pr).sum::<f64>() / k,
            });
        }
    }

    let n_methods = methods.len();
    let mut rank_roc: BTreeMap<String, f64> = methods.iter().map(|m| (m.to_string(), 0.0)).collect();
    let mut rank_pr = rank_roc.clone();
    for block in means.chunks(n_methods) {
        let roc: Vec<f64> = block.iter().map(|c| c.auc_roc).collect();
        let pr: Vec<f64> = block.iter().map(|c| c.auc_pr).collect();
        for (c, (r1, r2)) in block.iter().zip(average_ranks(&roc).into_iter().zip(average_ranks(&pr))) {
            *rank_roc.get_mut(&c.method).unwrap() += r1;
            *rank_pr.get_mut(&c.method).unwrap() += r2;
        }
    }
    let nd = datasets.len() as f64;
    rank_roc.values_mut().for_each(|v| *v /= nd);
    rank_pr.values_mut().for_each(|v| *v /= nd);

    Ok(Aggregate {
        cells: means,
        avg_rank_auc_roc: rank_roc,
        avg_rank_auc_pr: rank_pr,
    })
}
