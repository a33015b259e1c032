//! Alternating optimisation of encoder and mixture, ablation switches, and
//! inductive scoring.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StandardizationStats};
use crate::encoder::{self, AdamState, EncoderParams};
use crate::error::{Error, Result};
use crate::mixture::{self, DensityMode, MixtureParams};
use crate::scoring::{self, ScoreMode, ScoreVector};

/// How the encoder weights start out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderInit {
    /// Glorot-uniform weights.
    #[default]
    Random,
    /// Exact identity encoder and decoder (latent width = D, hidden ≥ 2D).
    Identity,
}

impl std::str::FromStr for EncoderInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(EncoderInit::Random),
            "identity" => Ok(EncoderInit::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown encoder init {s:?}"))),
        }
    }
}

/// Component-removal switches. At most one may be set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Gaussian mixture instead of Student's-t.
    pub gaussian_mixture: bool,
    /// Train the encoder on reconstruction loss only.
    pub no_joint_likelihood: bool,
    /// Never trim; every row stays in the fit.
    pub no_indicator: bool,
}

impl Ablation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn parse(name: &str) -> Result<Self> {
        let mut a = Self::default();
        match name {
            "none" => {}
            "gaussian_mixture" => a.gaussian_mixture = true,
            "no_joint_likelihood" => a.no_joint_likelihood = true,
            "no_indicator" => a.no_indicator = true,
            _ => return Err(Error::InvalidArgument(format!("unknown ablation {name:?}"))),
        }
        Ok(a)
    }

    pub fn name(&self) -> &'static str {
        match (self.gaussian_mixture, self.no_joint_likelihood, self.no_indicator) {
            (true, false, false) => "gaussian_mixture",
            (false, true, false) => "no_joint_likelihood",
            (false, false, true) => "no_indicator",
            (false, false, false) => "none",
            _ => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of mixture components K.
    pub n_components: usize,
    /// Fraction l of training rows trimmed as outliers.
    pub outlier_fraction: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    /// Encoder epochs per outer iteration.
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    /// Latent width; `None` means `min(D, 8)`.
    pub latent: Option<usize>,
    /// Outer alternating iterations t.
    pub outer_iters: usize,
    /// Minibatch size; `None` applies [`encoder::default_batch_size`].
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub density_mode: DensityMode,
    pub score_mode: ScoreMode,
    pub u_unsquared: bool,
    pub encoder_init: EncoderInit,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_components: 10,
            outlier_fraction: 0.01,
            em_tol: 1e-3,
            em_max_iter: 100,
            epochs: 100,
            lr: 1e-4,
            hidden: 128,
            latent: None,
            outer_iters: 10,
            batch_size: None,
            seed: 0,
            density_mode: DensityMode::PaperExact,
            score_mode: ScoreMode::Vector,
            u_unsquared: false,
            encoder_init: EncoderInit::Random,
            ablation: Ablation::none(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::InvalidArgument("n_components must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidArgument(format!(
                "outlier_fraction {} must be in [0, 1)",
                self.outlier_fraction
            )));
        }
        if self.lr.is_nan() || self.lr < 0.0 || self.em_tol.is_nan() || self.em_tol < 0.0 {
            return Err(Error::InvalidArgument("lr and em_tol must be nonnegative".into()));
        }
        if self.hidden == 0 || self.latent == Some(0) || self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("layer widths and batch size must be positive".into()));
        }
        let a = &self.ablation;
        if [a.gaussian_mixture, a.no_joint_likelihood, a.no_indicator]
            .iter()
            .filter(|&&f| f)
            .count()
            > 1
        {
            return Err(Error::InvalidArgument("at most one ablation may be set".into()));
        }
        Ok(())
    }

    pub fn latent_for(&self, input_dim: usize) -> usize {
        match self.encoder_init {
            EncoderInit::Identity => self.latent.unwrap_or(input_dim),
            EncoderInit::Random => self.latent.unwrap_or(input_dim.min(8)),
        }
    }
}

/// What a configuration actually does once ablations are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveSettings {
    pub density_mode: DensityMode,
    pub use_likelihood: bool,
    pub trim_fraction: f64,
}

pub fn apply_ablation(config: &TrainConfig) -> Result<EffectiveSettings> {
    config.validate()?;
    let a = config.ablation;
    Ok(EffectiveSettings {
        density_mode: if a.gaussian_mixture {
            DensityMode::Gaussian
        } else {
            config.density_mode
        },
        use_likelihood: !a.no_joint_likelihood,
        trim_fraction: if a.no_indicator {
            0.0
        } else {
            config.outlier_fraction
        },
    })
}

/// A trained detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: EncoderParams,
    pub mixture: MixtureParams,
    pub standardization: StandardizationStats,
    pub config: TrainConfig,
}

impl Model {
    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Scores raw (unstandardized) feature rows with the frozen model.
    pub fn score_features(&self, x: ArrayView2<'_, f64>, mode: ScoreMode) -> Result<ScoreVector> {
        let xs = self.standardization.apply(x)?;
        let z = self.encoder.encode(xs.view())?;
        Ok(scoring::score_all(z.view(), &self.mixture, mode))
    }

    pub fn embed(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let xs = self.standardization.apply(x)?;
        self.encoder.encode(xs.view())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Trimmed log-likelihood after the EM refit.
    #[serde(rename = "J")]
    pub log_likelihood: f64,
    /// Joint loss on the kept rows after the encoder update.
    pub joint_loss: f64,
    pub trimmed_count: usize,
    pub em_iters: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: Model,
    pub log: Vec<IterationLog>,
    /// Training-row scores from the final iteration.
    pub train_scores: ScoreVector,
}

/// Trains encoder and mixture by alternating trimming, encoder updates and EM.
///
/// Iteration 1 keeps every row. Each later iteration first trims the
/// `⌊N·l⌋` rows with the highest scores from the previous iteration. The encoder
/// is then updated on the kept rows against the current mixture, the kept rows
/// are re-embedded, and EM refits the mixture on them. The mixture is
/// re-seeded from the updated embeddings in iteration 1 and warm-started after.
pub fn fit(train: &Dataset, config: &TrainConfig) -> Result<FitOutput> {
    let effective = apply_ablation(config)?;
    let n = train.n_rows();
    let input_dim = train.n_features();
    if n < config.n_components {
        return Err(Error::InvalidArgument(format!(
            "need at least K={} training rows, got {n}",
            config.n_components
        )));
    }
    let stats = StandardizationStats::fit(train.features.view())?;
    let x = stats.apply(train.features.view())?;

    let latent = config.latent_for(input_dim);
    let mut enc = match config.encoder_init {
        EncoderInit::Random => EncoderParams::init(input_dim, config.hidden, latent, config.seed)?,
        EncoderInit::Identity => {
            if latent != input_dim {
                return Err(Error::InvalidArgument(format!(
                    "identity encoder needs latent = D = {input_dim}, got {latent}"
                )));
            }
            EncoderParams::identity(input_dim, config.hidden)?
        }
    };
    let mut adam = AdamState::new(&enc, config.lr);

    let init_mixture = |z: ArrayView2<'_, f64>| -> Result<MixtureParams> {
        let mut m = mixture::init_mixture(z, config.n_components, config.seed, effective.density_mode)?;
        m.u_unsquared = config.u_unsquared;
        Ok(m)
    };
    let z0 = enc.encode(x.view())?;
    let mut mix = init_mixture(z0.view())?;

    let all: Vec<usize> = (0..n).collect();
    let mut scores: Option<ScoreVector> = None;
    let mut log = Vec::with_capacity(config.outer_iters);

    for iteration in 1..=config.outer_iters {
        let kept = match &scores {
            Some(s) if effective.trim_fraction > 0.0 => {
                scoring::select_outliers(&s.scores, effective.trim_fraction)?.kept
            }
            _ => all.clone(),
        };
        if kept.is_empty() {
            return Err(Error::InvalidArgument("outlier fraction leaves no rows".into()));
        }
        let x_kept = if kept.len() == n {
            x.clone()
        } else {
            x.select(Axis(0), &kept)
        };

        let batch = config
            .batch_size
            .unwrap_or_else(|| encoder::default_batch_size(kept.len()));
        let likelihood_mix = effective.use_likelihood.then_some(&mix);
        let epoch_seed = config.seed.wrapping_add((iteration as u64) << 32);
        let loss = encoder::train_epochs(
            &mut enc,
            likelihood_mix,
            x_kept.view(),
            config.epochs,
            batch,
            &mut adam,
            epoch_seed,
        )?;

        let z = enc.encode(x.view())?;
        if iteration == 1 {
            mix = init_mixture(z.view())?;
        }
        let em = mixture::fit_em(z.view(), &kept, mix, config.em_tol, config.em_max_iter)?;
        mix = em.params;
        let s = scoring::score_all(z.view(), &mix, config.score_mode);
        if s.scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite scores in iteration {iteration}")));
        }
        scores = Some(s);
        log.push(IterationLog {
            iteration,
            log_likelihood: em.log_likelihood,
            joint_loss: loss.total(),
            trimmed_count: n - kept.len(),
            em_iters: em.iterations,
        });
    }

    let model = Model {
        encoder: enc,
        mixture: mix,
        standardization: stats,
        config: config.clone(),
    };
    let train_scores = match scores {
        Some(s) => s,
        None => model.score_features(train.features.view(), config.score_mode)?,
    };
    Ok(FitOutput {
        model,
        log,
        train_scores,
    })
}

/// Scores previously unseen rows with frozen parameters, using the model's
/// configured score mode.
pub fn score_inductive(model: &Model, test: &Dataset) -> Result<ScoreVector> {
    if test.n_features() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: test.n_features(),
        });
    }
    model.score_features(test.features.view(), model.config.score_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        Dataset::from_features("blob", x, None).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            n_components: 2,
            epochs: 2,
            outer_iters: 3,
            hidden: 6,
            outlier_fraction: 0.1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_follow_reference_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.n_components, 10);
        assert_eq!(c.outlier_fraction, 0.01);
        assert_eq!(c.lr, 1e-4);
        assert_eq!(c.epochs, 100);
        assert_eq!(c.em_tol, 1e-3);
        assert_eq!(c.em_max_iter, 100);
        assert_eq!(c.hidden, 128);
        assert_eq!(c.latent_for(30), 8);
        assert_eq!(c.latent_for(3), 3);
    }

    #[test]
    fn ablation_flags() {
        let mut c = TrainConfig::default();
        c.ablation.no_indicator = true;
        c.outlier_fraction = 0.3;
        let e = apply_ablation(&c).unwrap();
        assert_eq!(e.trim_fraction, 0.0);
        c.ablation.gaussian_mixture = true;
        assert!(apply_ablation(&c).is_err());
        let g = TrainConfig {
            ablation: Ablation::parse("gaussian_mixture").unwrap(),
            ..TrainConfig::default()
        };
        assert_eq!(apply_ablation(&g).unwrap().density_mode, DensityMode::Gaussian);
        assert!(Ablation::parse("bogus").is_err());
    }

    #[test]
    fn trims_exactly_floor_n_l_after_first_iteration() {
        let ds = blob(47, 3, 1);
        let out = fit(&ds, &quick()).unwrap();
        let counts: Vec<usize> = out.log.iter().map(|l| l.trimmed_count).collect();
        assert_eq!(counts, vec![0, 4, 4]);
    }

    #[test]
    fn no_indicator_never_trims() {
        let ds = blob(40, 3, 2);
        let mut c = quick();
        c.ablation.no_indicator = true;
        let out = fit(&ds, &c).unwrap();
        assert!(out.log.iter().all(|l| l.trimmed_count == 0));

        let mut zero_l = quick();
        zero_l.outlier_fraction = 0.0;
        let a = fit(&ds, &zero_l).unwrap();
        let b = fit(&ds, &c).unwrap();
        assert_eq!(a.model.mixture, b.model.mixture);
        assert_eq!(a.model.encoder, b.model.encoder);
    }

    #[test]
    fn fit_is_reproducible() {
        let ds = blob(30, 4, 3);
        let a = fit(&ds, &quick()).unwrap();
        let b = fit(&ds, &quick()).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.train_scores, b.train_scores);
    }

    #[test]
    fn inductive_scores_reproduce_training_scores() {
        let ds = blob(30, 4, 4);
        let out = fit(&ds, &quick()).unwrap();
        let again = score_inductive(&out.model, &ds).unwrap();
        assert_eq!(again, out.train_scores);
        assert!(score_inductive(&out.model, &blob(5, 3, 0)).is_err());
    }

    #[test]
    fn fit_errors() {
        let ds = blob(3, 2, 0);
        assert!(fit(&ds, &quick().clone()).is_ok());
        let many = TrainConfig {
            n_components: 4,
            ..quick()
        };
        assert!(fit(&ds, &many).is_err());
        let bad_identity = TrainConfig {
            encoder_init: EncoderInit::Identity,
            latent: Some(1),
            ..quick()
        };
        assert!(fit(&blob(10, 2, 0), &bad_identity).is_err());
    }
}
