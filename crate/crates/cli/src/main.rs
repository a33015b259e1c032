use std::path::PathBuf;
use std::process::ExitCode;

use anomix::scoring::ScoreMode;
use anomix_cli::bench::{cmd_bench, DEFAULT_SEEDS};
use anomix_cli::{cmd_eval, cmd_fit, cmd_score, cmd_toy, CliError, FitOptions, ScoreOptions, TrainFlags};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anomix", version, about = "Trimmed t-mixture autoencoder anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV file
    Fit {
        /// Training CSV with a header row
        #[arg(long)]
        train: PathBuf,
        /// Where to write the model JSON
        #[arg(long)]
        model: PathBuf,
        /// Where to write the per-iteration training log JSON
        #[arg(long)]
        log: Option<PathBuf>,
        /// Where to write the training-row scores CSV
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Column excluded from the features when present
        #[arg(long, default_value = "label")]
        label_column: String,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Score a CSV with a trained model
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// scalar or vector; defaults to the model's training mode
        #[arg(long)]
        mode: Option<ScoreMode>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
    },
    /// Compute AUC-ROC and AUC-PR for a scores CSV
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Labels CSV, or a labeled data CSV
        #[arg(long, alias = "data")]
        labels: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Recorded in the report
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the group-anomaly toy dataset
    Toy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit, score and evaluate every CSV in a directory over several seeds
    Bench {
        #[arg(long)]
        dir: PathBuf,
        /// Comma-separated: vector, scalar, or an ablation name
        #[arg(long, value_delimiter = ',', default_value = "vector,scalar")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            train,
            model,
            log,
            scores,
            label_column,
            flags,
        } => {
            let opts = FitOptions {
                train,
                label_column,
                config: flags.resolve()?,
                model_out: model,
                log_out: log,
                scores_out: scores,
            };
            let out = cmd_fit(&opts)?;
            if let Some(last) = out.log.last() {
                eprintln!(
                    "fitted {} iterations, final J = {:.6}, trimmed {}",
                    last.iteration, last.log_likelihood, last.trimmed_count
                );
            }
        }
        Command::Score {
            model,
            data,
            mode,
            out,
            label_column,
        } => {
            let scores = cmd_score(&ScoreOptions {
                model,
                data,
                label_column,
                mode,
                out,
            })?;
            eprintln!("scored {} rows", scores.len());
        }
        Command::Eval {
            scores,
            labels,
            label_column,
            seed,
            out,
        } => {
            let report = cmd_eval(&scores, &labels, &label_column, seed, out.as_deref())?;
            if out.is_none() {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
        }
        Command::Toy { seed, out } => {
            let ds = cmd_toy(seed, &out)?;
            eprintln!("wrote {} rows to {}", ds.n_rows(), out.display());
        }
        Command::Bench {
            dir,
            methods,
            seeds,
            label_column,
            out,
            flags,
        } => {
            let config = flags.resolve()?;
            let report = cmd_bench(&dir, &label_column, &config, &methods, &seeds, out.as_deref())?;
            if out.is_none() {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
