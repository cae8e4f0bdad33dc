//! `pdisc`: corpus preparation, training and evaluation for privacy
//! disclosure detection.

mod backends;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdisc_core::nnmodel::Variant;

use crate::commands::SingleInput;
use crate::config::{parse_variant, EncoderKind, LexiconKind, ParserKind, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pdisc", version, about = "Detect privacy disclosures in short social media posts")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    encoder: Option<EncoderKind>,
    #[arg(long, global = true, value_enum)]
    parser: Option<ParserKind>,
    #[arg(long, global = true, value_enum)]
    lexicon: Option<LexiconKind>,
    /// Input corpus (.jsonl or .csv)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output file or directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Checkpoint directory written by `train`
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus file and rewrite it as JSON lines
    Ingest,
    /// Generate a labeled synthetic corpus
    Synth {
        #[arg(long)]
        n_per_cell: Option<usize>,
        /// Fraction of posts drawn from templates shared by both labels
        #[arg(long)]
        ambiguous_share: Option<f64>,
    },
    /// Balance every (type, label) cell with synonym-replaced copies
    Augment {
        /// Target size of each cell; defaults to the largest cell
        #[arg(long)]
        per_cell: Option<usize>,
    },
    /// Train the joint model and write a checkpoint to --out
    Train {
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a checkpoint on the held-out split of --data
    Evaluate,
    /// Label the posts in --data, or a single post
    Predict {
        #[arg(long, conflicts_with = "data")]
        text: Option<String>,
        #[arg(long, requires = "text")]
        device: Option<String>,
        /// UTC timestamp, e.g. 2019-03-01T21:15:00Z
        #[arg(long, requires = "text")]
        time: Option<String>,
    },
    /// Train each model variant and tabulate test accuracy
    Ablate {
        /// Comma-separated list; defaults to all variants
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Option<Vec<Variant>>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Compare the full model with bag-of-words and recurrent baselines
    Baseline {
        #[command(flatten)]
        train: TrainFlags,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            encoder: self.encoder,
            parser: self.parser,
            lexicon: self.lexicon,
            data: self.data.clone(),
            out: self.out.clone(),
            checkpoint: self.checkpoint.clone(),
            ..RunConfig::default()
        }
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.epochs = self.epochs.or(cfg.epochs);
        cfg.batch_size = self.batch_size.or(cfg.batch_size);
        cfg.learning_rate = self.learning_rate.or(cfg.learning_rate);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => RunConfig::load(config::existing(path, "config file")?)?,
        None => RunConfig::default(),
    };
    let mut cfg = file.merge(&cli.global.overrides());
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Synth {
            n_per_cell,
            ambiguous_share,
        } => {
            cfg.n_per_cell = n_per_cell.or(cfg.n_per_cell);
            cfg.ambiguous_share = ambiguous_share.or(cfg.ambiguous_share);
            commands::synth(&cfg)
        }
        Command::Augment { per_cell } => {
            cfg.per_cell = per_cell.or(cfg.per_cell);
            commands::augment(&cfg)
        }
        Command::Train { train } => {
            train.apply(&mut cfg);
            commands::train_cmd(&cfg)
        }
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Predict { text, device, time } => commands::predict(&cfg, &SingleInput { text, device, time }),
        Command::Ablate { variants, train } => {
            train.apply(&mut cfg);
            cfg.variants = variants.or(cfg.variants);
            commands::ablate(&cfg)
        }
        Command::Baseline { train } => {
            train.apply(&mut cfg);
            commands::baseline(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
