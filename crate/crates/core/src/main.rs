//! `mcnn` command line: train / eval / report / params.
//!
//! Exit codes: 0 success, 1 when one or more folds failed but the run
//! continued, 2 for usage or environment errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcnn::config::ExperimentConfig;
use mcnn::runner;

#[derive(Parser)]
#[command(name = "mcnn", version, about = "Train and evaluate a compact CNN with k-fold cross-validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per cross-validation fold and write per-fold reports.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a dataset and write report files.
    Eval {
        /// Checkpoint container to load.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root (one directory per class).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate per-fold reports of a run into summary.csv / summary.txt.
    Report {
        /// Run directory produced by `train`.
        #[arg(long)]
        run: PathBuf,
    },
    /// Print per-layer output shapes and parameter counts.
    Params {
        /// Class count of the output layer.
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Optional config file (for activation slope and dropout).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Derive the class count from a dataset root instead.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

/// Every config key is overridable by the flag of the same name.
#[derive(Args)]
struct TrainArgs {
    /// Config file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root (one directory per class).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    dropout: Option<f32>,
    #[arg(long)]
    leaky_slope: Option<f32>,
    #[arg(long)]
    beta1: Option<f32>,
    #[arg(long)]
    beta2: Option<f32>,
    #[arg(long)]
    epsilon: Option<f32>,
    #[arg(long)]
    weight_decay: Option<f32>,
    /// Disable training-time augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Fold strategy: plain or stratified.
    #[arg(long)]
    strategy: Option<String>,
    /// Numeric mode: f32 or f64-check.
    #[arg(long)]
    precision: Option<String>,
}

impl TrainArgs {
    fn into_config(self) -> mcnn::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.data {
            cfg.data = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = self.leaky_slope {
            cfg.leaky_slope = v;
        }
        if let Some(v) = self.beta1 {
            cfg.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            cfg.beta2 = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.weight_decay = v;
        }
        if self.no_augment {
            cfg.augment = false;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v.parse()?;
        }
        if let Some(v) = self.precision {
            cfg.precision = v.parse()?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> mcnn::Result<ExitCode> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.into_config()?;
            if !cfg.data.as_os_str().is_empty() && !cfg.data.exists() {
                eprintln!("error: dataset root {} does not exist", cfg.data.display());
                return Ok(ExitCode::from(2));
            }
            let outcome = runner::train(&cfg)?;
            for result in &outcome.completed {
                println!(
                    "fold {}: accuracy {:.4}, macro F1 {:.4}, first-batch loss {}",
                    result.fold, result.report.accuracy, result.report.macro_f1,
                    result.first_batch_loss,
                );
            }
            println!(
                "{} of {} folds completed; reports under {}",
                outcome.completed.len(),
                outcome.plan.k(),
                cfg.out.display()
            );
            if outcome.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Eval { checkpoint, data, out } => {
            let report = runner::eval_checkpoint(&checkpoint, &data, &out)?;
            println!(
                "accuracy {:.4}, macro F1 {:.4}; reports under {}",
                report.accuracy,
                report.macro_f1,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { run } => {
            let summary = runner::report(&run)?;
            print!("{}", std::fs::read_to_string(run.join("summary.txt")).unwrap_or_default());
            println!("{} metrics aggregated into {}", summary.rows.len(), run.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Params { classes, config, data } => {
            let (slope, dropout) = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    (cfg.leaky_slope, cfg.dropout)
                }
                None => (mcnn::nn::DEFAULT_LEAKY_SLOPE, mcnn::nn::DEFAULT_DROPOUT),
            };
            let classes = match data {
                Some(root) => mcnn::data::DatasetIndex::scan(&root)?.classes(),
                None => classes,
            };
            print!("{}", runner::params_table(classes, slope, dropout)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
