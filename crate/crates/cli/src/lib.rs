//! Command implementations behind the `anomix` binary.
//!
//! Every command writes its outputs through a temporary file that is renamed
//! into place, so a failed run never leaves a partial file behind.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;

pub use bench::{cmd_bench, method_config, run_bench, BenchRecord, BenchReport};
pub use commands::{cmd_eval, cmd_fit, cmd_score, cmd_toy, FitOptions, ScoreOptions};
pub use config::{apply_setting, parse_config, TrainFlags};
pub use error::CliError;
pub use model_file::{ModelFile, SCHEMA_VERSION};
