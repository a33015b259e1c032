use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anomix::dataset::{generate_group_anomaly_toy, load_csv, to_csv_string, Dataset};
use anomix::eval::{evaluate, MetricReport};
use anomix::scoring::ScoreMode;
use anomix::trainer::{fit, FitOutput};
use anomix::TrainConfig;

use crate::config::read_text;
use crate::error::CliError;
use crate::model_file::ModelFile;

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// Loads a CSV, treating `label_column` as labels when the header has it.
pub fn load_dataset(path: &Path, label_column: &str) -> Result<Dataset, CliError> {
    match load_csv(path, Some(label_column)) {
        Err(anomix::Error::MissingLabelColumn(_)) => Ok(load_csv(path, None)?),
        other => Ok(other?),
    }
}

pub fn scores_csv(scores: &[f64]) -> String {
    let mut out = String::from("index,score\n");
    for (i, s) in scores.iter().enumerate() {
        writeln!(out, "{i},{s:.16e}").expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub train: PathBuf,
    pub label_column: String,
    pub config: TrainConfig,
    pub model_out: PathBuf,
    pub log_out: Option<PathBuf>,
    pub scores_out: Option<PathBuf>,
}

/// Trains on a CSV and writes the model, plus optionally the per-iteration
/// log and the training-row scores.
pub fn cmd_fit(opts: &FitOptions) -> Result<FitOutput, CliError> {
    let train = load_dataset(&opts.train, &opts.label_column)?;
    let out = fit(&train, &opts.config)?;
    if let Some(path) = &opts.log_out {
        let mut text = serde_json::to_string_pretty(&out.log).expect("log serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &opts.scores_out {
        write_atomic(path, scores_csv(&out.train_scores.scores).as_bytes())?;
    }
    ModelFile::save(&out.model, &opts.model_out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub model: PathBuf,
    pub data: PathBuf,
    pub label_column: String,
    /// Falls back to the mode the model was trained with.
    pub mode: Option<ScoreMode>,
    pub out: PathBuf,
}

/// Scores every row of a CSV with a saved model; returns the scores.
pub fn cmd_score(opts: &ScoreOptions) -> Result<Vec<f64>, CliError> {
    let model = ModelFile::load(&opts.model)?;
    let data = load_dataset(&opts.data, &opts.label_column)?;
    if data.n_features() != model.input_dim() {
        return Err(CliError::Data(format!(
            "{} has {} feature columns but the model expects {}",
            opts.data.display(),
            data.n_features(),
            model.input_dim()
        )));
    }
    let mode = opts.mode.unwrap_or(model.config.score_mode);
    let scores = model.score_features(data.features.view(), mode)?.scores;
    write_atomic(&opts.out, scores_csv(&scores).as_bytes())?;
    Ok(scores)
}

/// Reads an `index,score` file, requiring indices `0..n` in order.
pub fn read_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read_text(path)?;
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header.trim() != "index,score" {
        return Err(bad(format!("expected header index,score, found {header:?}")));
    }
    let mut scores = Vec::new();
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let (idx, score) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("row {}: expected two fields", row + 1)))?;
        if idx.trim().parse::<usize>().ok() != Some(row) {
            return Err(bad(format!("row {}: index {idx:?} out of sequence", row + 1)));
        }
        let v: f64 = score
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {}: invalid score {score:?}", row + 1)))?;
        scores.push(v);
    }
    Ok(scores)
}

/// Reads 0/1 labels from `column` of a CSV, or from its only column.
pub fn read_labels(path: &Path, column: &str) -> Result<Vec<u8>, CliError> {
    let text = read_text(path)?;
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = match header.iter().position(|h| *h == column) {
        Some(c) => c,
        None if header.len() == 1 => 0,
        None => return Err(bad(format!("no {column:?} column"))),
    };
    let mut labels = Vec::new();
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let cell = line.split(',').nth(col).map(str::trim).unwrap_or("");
        let label = match cell.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => return Err(bad(format!("row {}: label {cell:?} is not 0 or 1", row + 1))),
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Computes AUC-ROC and AUC-PR for a score file against labels.
pub fn cmd_eval(
    scores_path: &Path,
    labels_path: &Path,
    label_column: &str,
    seed: u64,
    out: Option<&Path>,
) -> Result<MetricReport, CliError> {
    let scores = read_scores(scores_path)?;
    let labels = read_labels(labels_path, label_column)?;
    if scores.len() != labels.len() {
        return Err(CliError::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let report = evaluate(&scores, &labels, seed)?;
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(report)
}

/// Writes the group-anomaly toy dataset.
pub fn cmd_toy(seed: u64, out: &Path) -> Result<Dataset, CliError> {
    let ds = generate_group_anomaly_toy(seed);
    write_atomic(out, to_csv_string(&ds).as_bytes())?;
    Ok(ds)
}

/// CSV files directly inside `dir`, sorted by name.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    Ok(files)
}
