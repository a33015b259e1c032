//! Anomaly scores and the trimming indicator.
//!
//! Both scores are reciprocals of an aggregate of the per-component forces
//! `F_k(z)` (see [`MixtureParams::component_force`]):
//!
//! - scalar: `1 / Σ_k F_k`
//! - vector: `1 / ‖Σ_k F_k · r̂_k‖`, with `r̂_k` the unit vector from `z` toward
//!   prototype `k`, so that pulls in opposing directions cancel.
//!
//! Aggregates below [`NORM_FLOOR`] are clamped, capping scores at
//! [`SCORE_CEILING`].

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{log_sum_exp, MixtureParams};

pub const NORM_FLOOR: f64 = 1e-12;
pub const SCORE_CEILING: f64 = 1e12;

/// Prototypes closer than this contribute no direction.
pub const DIRECTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Scalar,
    #[default]
    Vector,
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Scalar => "scalar",
            ScoreMode::Vector => "vector",
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(ScoreMode::Scalar),
            "vector" => Ok(ScoreMode::Vector),
            _ => Err(Error::InvalidArgument(format!("unknown score mode {s:?}"))),
        }
    }
}

/// Per-row anomaly scores, higher is more anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub mode: ScoreMode,
}

fn reciprocal_from_log(log_aggregate: f64) -> f64 {
    if log_aggregate < NORM_FLOOR.ln() {
        SCORE_CEILING
    } else {
        (-log_aggregate).exp().min(SCORE_CEILING)
    }
}

pub fn scalar_score(z: ArrayView1<'_, f64>, params: &MixtureParams) -> f64 {
    scalar_with(z, params, &params.log_coefficients())
}

fn scalar_with(z: ArrayView1<'_, f64>, params: &MixtureParams, coeffs: &[f64]) -> f64 {
    let (logf, _) = params.log_forces(z, coeffs);
    reciprocal_from_log(log_sum_exp(&logf))
}

pub fn vector_score(z: ArrayView1<'_, f64>, params: &MixtureParams) -> f64 {
    vector_with(z, params, &params.log_coefficients())
}

fn vector_with(z: ArrayView1<'_, f64>, params: &MixtureParams, coeffs: &[f64]) -> f64 {
    let (logf, _) = params.log_forces(z, coeffs);
    let d = z.len();

    let mut directions = Vec::with_capacity(params.n_components());
    for k in 0..params.n_components() {
        let mu = params.prototypes.row(k);
        let dist = mu
            .iter()
            .zip(z.iter())
            .map(|(m, x)| (m - x) * (m - x))
            .sum::<f64>()
            .sqrt();
        if dist >= DIRECTION_EPS {
            directions.push((k, dist));
        }
    }
    // A single pulling component has ‖F·r̂‖ = F exactly.
    if let [(k, _)] = directions[..] {
        return reciprocal_from_log(logf[k]);
    }
    if directions.is_empty() {
        return SCORE_CEILING;
    }

    // Forces are rescaled by the largest one so that tiny densities do not
    // underflow before the norm is taken.
    let max = directions
        .iter()
        .map(|&(k, _)| logf[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return SCORE_CEILING;
    }
    let mut resultant = vec![0.0; d];
    for &(k, dist) in &directions {
        let w = (logf[k] - max).exp() / dist;
        let mu = params.prototypes.row(k);
        for j in 0..d {
            resultant[j] += w * (mu[j] - z[j]);
        }
    }
    let norm = resultant.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return SCORE_CEILING;
    }
    reciprocal_from_log(max + norm.ln())
}

/// Applies the chosen score to every row of `z`.
pub fn score_all(z: ArrayView2<'_, f64>, params: &MixtureParams, mode: ScoreMode) -> ScoreVector {
    let coeffs = params.log_coefficients();
    let scores = z
        .outer_iter()
        .map(|row| match mode {
            ScoreMode::Scalar => scalar_with(row, params, &coeffs),
            ScoreMode::Vector => vector_with(row, params, &coeffs),
        })
        .collect();
    ScoreVector { scores, mode }
}

/// Partition of row indices into trimmed (anomalous) and kept rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSet {
    /// Indices of the `⌊N·l⌋` highest scores, highest first.
    pub removed: Vec<usize>,
    /// Remaining indices in ascending order.
    pub kept: Vec<usize>,
    pub fraction: f64,
}

/// Marks the `⌊N·l⌋` highest-scoring rows as outliers. Ties go to the lower
/// index first.
pub fn select_outliers(scores: &[f64], fraction: f64) -> Result<OutlierSet> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "outlier fraction {fraction} must be in [0, 1)"
        )));
    }
    let n = scores.len();
    let n_remove = (n as f64 * fraction).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let removed: Vec<usize> = order[..n_remove].to_vec();
    let mut flag = vec![false; n];
    for &i in &removed {
        flag[i] = true;
    }
    let kept = (0..n).filter(|&i| !flag[i]).collect();
    Ok(OutlierSet {
        removed,
        kept,
        fraction,
    })
}
