//! Tabular data: CSV ingestion, per-feature z-scoring, inductive splits, and the
//! synthetic group-anomaly dataset.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An N×D feature matrix with optional binary anomaly labels (1 = anomaly).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    /// Builds a dataset, checking shape, finiteness and label invariants.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidData(format!("empty feature matrix {n}x{d}")));
        }
        if columns.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: columns.len(),
            });
        }
        if let Some((i, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                i / d,
                i % d
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: labels.len(),
                });
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::InvalidData(format!("label {bad} is not 0 or 1")));
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            features,
            labels,
        })
    }

    /// Convenience constructor that names columns `x0..x{D-1}`.
    pub fn from_features(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let columns = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(name, columns, features, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        let features = self.features.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(name, self.columns.clone(), features, labels)
    }

    fn with_features(&self, features: Array2<f64>) -> Self {
        Self {
            name: self.name.clone(),
            columns: self.columns.clone(),
            features,
            labels: self.labels.clone(),
        }
    }
}

/// Reads a headed, comma-separated file of numeric cells.
///
/// When `label_column` is given that column is split off as the label vector
/// and must contain only `0`/`1`; otherwise every column is a feature. Rows are
/// numbered from 1 (the first data row after the header) in error messages.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, label_column, name).map_err(|e| match e {
        Error::MissingHeader { .. } => Error::MissingHeader { path: path.into() },
        other => other,
    })
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, label_column: Option<&str>, name: impl Into<String>) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or(Error::MissingHeader {
            path: Default::default(),
        })?
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let label_idx = match label_column {
        Some(col) => Some(
            header
                .iter()
                .position(|h| h == col)
                .ok_or_else(|| Error::MissingLabelColumn(col.to_string()))?,
        ),
        None => None,
    };
    let width = header.len();
    let n_features = width - usize::from(label_idx.is_some());
    if n_features == 0 {
        return Err(Error::InvalidData("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(Error::RaggedRow {
                row,
                expected: width,
                found: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            if Some(j) == label_idx {
                match *cell {
                    "0" => labels.push(0u8),
                    "1" => labels.push(1u8),
                    _ => {
                        return Err(Error::InvalidLabel {
                            row,
                            value: cell.to_string(),
                        })
                    }
                }
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumericCell {
                        row,
                        column: header[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let features = Array2::from_shape_vec((n_rows, n_features), values)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    let columns = header
        .into_iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h)
        .collect();
    Dataset::new(name, columns, features, label_idx.map(|_| labels))
}

/// Renders a dataset as CSV. Labels, when present, go in a trailing `label`
/// column. Values are written with 17 significant digits so that reloading is
/// bit-exact.
pub fn to_csv_string(ds: &Dataset) -> String {
    let mut out = ds.columns.join(",");
    if ds.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in ds.features.outer_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        if let Some(labels) = &ds.labels {
            write!(out, ",{}", labels[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv_string(ds)).map_err(|e| Error::io(path, e))
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Constant columns get `std = 1`, so they map to all zeros.
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidData("cannot standardize an empty matrix".into()));
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                mean.push(first);
                std.push(1.0);
                continue;
            }
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        Ok((&x - &mean) / &std)
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(ds.with_features(self.apply(ds.features.view())?))
    }
}

/// Fits z-scoring on `train` and applies it to `train` followed by `others`.
/// The returned list has `1 + others.len()` datasets, train first.
pub fn standardize_fit_apply(
    train: &Dataset,
    others: &[Dataset],
) -> Result<(Vec<Dataset>, StandardizationStats)> {
    let stats = StandardizationStats::fit(train.features.view())?;
    let mut out = Vec::with_capacity(1 + others.len());
    out.push(stats.apply_dataset(train)?);
    for ds in others {
        out.push(stats.apply_dataset(ds)?);
    }
    Ok((out, stats))
}

/// How to divide a dataset into train and test halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

/// Deterministic train/test partition. Both halves keep the original row order.
///
/// The train half has `floor(N * train_fraction)` rows. When stratified, each
/// class contributes `floor(n_c * train_fraction)` rows and the remaining slots
/// go to the classes with the largest fractional parts.
pub fn split_inductive(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction {f} must be in (0, 1]"
        )));
    }
    let n = ds.n_rows();
    let n_train = (n as f64 * f).floor() as usize;
    if n_train == 0 {
        return Err(Error::InvalidArgument(format!(
            "train_fraction {f} leaves the train split empty for N={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut train_idx = if spec.stratified {
        let labels = ds.labels.as_ref().ok_or_else(|| {
            Error::InvalidArgument("stratified split requires labels".into())
        })?;
        let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            classes[l as usize].push(i);
        }
        let ideal: Vec<f64> = classes.iter().map(|c| c.len() as f64 * f).collect();
        let mut quota: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
        let mut order = [0usize, 1];
        order.sort_by(|&a, &b| {
            let fa = ideal[a] - ideal[a].floor();
            let fb = ideal[b] - ideal[b].floor();
            fb.total_cmp(&fa)
        });
        let mut remaining = n_train - quota.iter().sum::<usize>();
        for &c in order.iter().cycle().take(4) {
            if remaining == 0 {
                break;
            }
            if quota[c] < classes[c].len() {
                quota[c] += 1;
                remaining -= 1;
            }
        }
        let mut picked = Vec::with_capacity(n_train);
        for (class, q) in classes.iter_mut().zip(quota) {
            class.shuffle(&mut rng);
            picked.extend_from_slice(&class[..q]);
        }
        picked
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(n_train);
        all
    };
    train_idx.sort_unstable();

    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    let train = ds.select_rows(&train_idx, format!("{}-train", ds.name))?;
    let test = if test_idx.is_empty() {
        // A full-train split still needs a well-formed (but row-less) test half;
        // Dataset forbids N = 0, so hand back an empty matrix directly.
        Dataset {
            name: format!("{}-test", ds.name),
            columns: ds.columns.clone(),
            features: Array2::zeros((0, ds.n_features())),
            labels: ds.labels.as_ref().map(|_| Vec::new()),
        }
    } else {
        ds.select_rows(&test_idx, format!("{}-test", ds.name))?
    };
    Ok((train, test))
}

pub const TOY_NORMAL_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]];
pub const TOY_NORMAL_STD: f64 = 2.0;
pub const TOY_NORMAL_PER_CLUSTER: usize = 300;
pub const TOY_ANOMALY_CENTER: [f64; 2] = [5.0, 4.0];
pub const TOY_ANOMALY_STD: f64 = 0.3;
pub const TOY_ANOMALY_COUNT: usize = 30;

/// Three broad Gaussian clusters of normal points plus one small, tight
/// cluster of anomalies sitting between them. Normal rows come first.
pub fn generate_group_anomaly_toy(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * TOY_NORMAL_PER_CLUSTER + TOY_ANOMALY_COUNT;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    let mut emit = |center: [f64; 2], std: f64, count: usize, label: u8, rng: &mut ChaCha8Rng| {
        let noise = Normal::new(0.0, std).expect("positive std");
        for _ in 0..count {
            features[[row, 0]] = center[0] + noise.sample(rng);
            features[[row, 1]] = center[1] + noise.sample(rng);
            labels.push(label);
            row += 1;
        }
    };
    for center in TOY_NORMAL_CENTERS {
        emit(center, TOY_NORMAL_STD, TOY_NORMAL_PER_CLUSTER, 0, &mut rng);
    }
    emit(TOY_ANOMALY_CENTER, TOY_ANOMALY_STD, TOY_ANOMALY_COUNT, 1, &mut rng);
    Dataset::new(
        format!("group-toy-{seed}"),
        vec!["x".into(), "y".into()],
        features,
        Some(labels),
    )
    .expect("generated data is finite")
}
