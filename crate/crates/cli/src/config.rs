//! Flat `key = value` configuration files and command-line overrides.
//!
//! Keys are the [`TrainConfig`] field names, plus `k` for `n_components` and
//! `l` for `outlier_fraction`. Lines starting with `#` are comments. Values
//! read from a file override the defaults, and flags override the file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anomix::mixture::DensityMode;
use anomix::scoring::ScoreMode;
use anomix::trainer::{Ablation, EncoderInit};
use anomix::TrainConfig;

use crate::error::CliError;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>, CliError> {
    match value {
        "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// Sets one configuration field from its textual form.
pub fn apply_setting(config: &mut TrainConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "n_components" | "k" => config.n_components = parse(key, value)?,
        "outlier_fraction" | "l" => config.outlier_fraction = parse(key, value)?,
        "em_tol" => config.em_tol = parse(key, value)?,
        "em_max_iter" => config.em_max_iter = parse(key, value)?,
        "epochs" => config.epochs = parse(key, value)?,
        "lr" => config.lr = parse(key, value)?,
        "hidden" => config.hidden = parse(key, value)?,
        "latent" => config.latent = parse_optional(key, value)?,
        "outer_iters" => config.outer_iters = parse(key, value)?,
        "batch_size" => config.batch_size = parse_optional(key, value)?,
        "seed" => config.seed = parse(key, value)?,
        "density_mode" => config.density_mode = DensityMode::from_str(value).map_err(usage)?,
        "score_mode" => config.score_mode = ScoreMode::from_str(value).map_err(usage)?,
        "u_unsquared" => config.u_unsquared = parse(key, value)?,
        "encoder_init" => config.encoder_init = EncoderInit::from_str(value).map_err(usage)?,
        "ablation" => config.ablation = Ablation::parse(value).map_err(usage)?,
        _ => return Err(CliError::Usage(format!("unknown configuration key {key:?}"))),
    }
    Ok(())
}

fn usage(e: anomix::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses a configuration file body on top of the defaults.
pub fn parse_config(text: &str) -> Result<TrainConfig, CliError> {
    let mut config = TrainConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
        })?;
        apply_setting(&mut config, key.trim(), value.trim())?;
    }
    Ok(config)
}

/// Training flags shared by `fit` and `bench`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct TrainFlags {
    /// Flat key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of mixture components K
    #[arg(long = "k", visible_alias = "n-components")]
    pub n_components: Option<usize>,
    /// Fraction of training rows trimmed as outliers
    #[arg(long = "l", visible_alias = "outlier-fraction")]
    pub outlier_fraction: Option<f64>,
    #[arg(long)]
    pub em_tol: Option<f64>,
    #[arg(long)]
    pub em_max_iter: Option<usize>,
    /// Encoder epochs per outer iteration
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    /// Outer alternating iterations
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// paper_exact, standard_t or gaussian
    #[arg(long)]
    pub density_mode: Option<String>,
    /// scalar or vector
    #[arg(long)]
    pub score_mode: Option<String>,
    /// Use the unsquared distance in the EM scale factor
    #[arg(long)]
    pub u_unsquared: bool,
    /// random or identity
    #[arg(long)]
    pub encoder_init: Option<String>,
    /// none, gaussian_mixture, no_joint_likelihood or no_indicator
    #[arg(long)]
    pub ablation: Option<String>,
}

impl TrainFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => parse_config(&read_text(path)?)?,
            None => TrainConfig::default(),
        };
        let settings: [(&str, Option<String>); 15] = [
            ("n_components", self.n_components.map(|v| v.to_string())),
            ("outlier_fraction", self.outlier_fraction.map(|v| v.to_string())),
            ("em_tol", self.em_tol.map(|v| v.to_string())),
            ("em_max_iter", self.em_max_iter.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("hidden", self.hidden.map(|v| v.to_string())),
            ("latent", self.latent.map(|v| v.to_string())),
            ("outer_iters", self.outer_iters.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("density_mode", self.density_mode.clone()),
            ("score_mode", self.score_mode.clone()),
            ("encoder_init", self.encoder_init.clone()),
            ("ablation", self.ablation.clone()),
        ];
        for (key, value) in settings {
            if let Some(v) = value {
                apply_setting(&mut config, key, &v)?;
            }
        }
        if self.u_unsquared {
            config.u_unsquared = true;
        }
        config.validate().map_err(usage)?;
        Ok(config)
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}
