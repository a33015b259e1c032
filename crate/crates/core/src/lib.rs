//! Unsupervised anomaly detection with an autoencoder trained jointly against a
//! trimmed Student's-t mixture model.
//!
//! The pipeline alternates three steps: drop the currently most anomalous
//! fraction of the training rows, update the encoder on the remaining rows, and
//! refit the mixture in latent space with EM. Anomaly scores are reciprocals of
//! either the mixture likelihood (scalar mode) or the norm of the
//! direction-weighted sum of per-component "forces" (vector mode).
//!
//! Modules:
//! - [`dataset`]: CSV ingestion, z-scoring, inductive splits and the synthetic
//!   group-anomaly toy.
//! - [`encoder`]: two-layer MLP autoencoder with analytic joint-loss gradients
//!   and Adam.
//! - [`mixture`]: diagonal Student's-t (and Gaussian) mixture densities and EM.
//! - [`scoring`]: scalar and vector scores, outlier trimming.
//! - [`trainer`]: the alternating optimisation loop, ablations and inference.
//! - [`eval`]: AUC-ROC, average precision and multi-run aggregation.

pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod mixture;
pub mod scoring;
pub mod trainer;

pub use dataset::{Dataset, SplitSpec, StandardizationStats};
pub use encoder::{AdamState, EncoderParams, Gradients, JointLoss};
pub use error::{Error, Result};
pub use eval::MetricReport;
pub use mixture::{DensityMode, MixtureParams};
pub use scoring::{OutlierSet, ScoreMode, ScoreVector};
pub use trainer::{Model, TrainConfig};
