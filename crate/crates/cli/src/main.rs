//! Command-line front end for the `intervalize` tokenizer.

mod commands;
mod config;
mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::StrategyArgs;
use crate::corpus::Usage;

#[derive(Debug, Parser)]
#[command(name = "intervalize", version, about = "Interval-aware REMI tokenization of MIDI corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Worker threads. Output does not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output file (directory for `detokenize`). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize MIDI files into JSONL, one record per file.
    Tokenize {
        #[command(flatten)]
        common: Common,
        /// Emit vocabulary ids instead of token strings.
        #[arg(long)]
        ids: bool,
        /// Vocabulary file to take ids from; built from the flags otherwise.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Decode a token JSONL file into MIDI files under `--out`.
    Detokenize {
        #[command(flatten)]
        common: Common,
        /// Starting pitch for horizontal reference chains.
        #[arg(long, default_value_t = 60)]
        anchor: u8,
        /// Vocabulary for records that carry ids.
        #[arg(long)]
        vocab: Option<PathBuf>,
        tokens: PathBuf,
    },
    /// Write the vocabulary of the selected strategy.
    Vocab {
        #[command(flatten)]
        common: Common,
    },
    /// Check that decoding recovers each piece.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 60)]
        anchor: u8,
        /// Audit a token JSONL file instead of MIDI inputs.
        #[arg(long, conflicts_with = "inputs")]
        tokens: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(required_unless_present = "tokens")]
        inputs: Vec<PathBuf>,
    },
    /// Project note labels onto tokens.
    AlignLabels {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        labels: commands::LabelArgs,
        /// Also write the sorted label names, whose indices are the ids.
        #[arg(long)]
        label_map: Option<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[command(subcommand)]
        stat: Stat,
    },
    /// Dump the reference line chosen for each piece.
    ExtractReference {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum Stat {
    /// Vertical interval histogram per label.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        labels: commands::LabelArgs,
        /// Sidecar suffix of predicted labels, e.g. `pred.json`.
        #[arg(long)]
        predicted_suffix: Option<String>,
        inputs: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<usize> {
    match cli.command {
        Command::Tokenize {
            common,
            ids,
            vocab,
            inputs,
        } => commands::tokenize(&common, ids, vocab.as_deref(), &inputs),
        Command::Detokenize {
            common,
            anchor,
            vocab,
            tokens,
        } => commands::detokenize(&common, anchor, vocab.as_deref(), &tokens),
        Command::Vocab { common } => commands::vocab(&common),
        Command::Roundtrip {
            common,
            anchor,
            tokens,
            vocab,
            inputs,
        } => match tokens {
            Some(tokens) => commands::roundtrip_tokens(&common, anchor, vocab.as_deref(), &tokens),
            None => commands::roundtrip(&common, &inputs),
        },
        Command::AlignLabels {
            common,
            labels,
            label_map,
            inputs,
        } => commands::align(&common, &labels, label_map.as_deref(), &inputs),
        Command::Stats {
            stat:
                Stat::Histogram {
                    common,
                    labels,
                    predicted_suffix,
                    inputs,
                },
        } => commands::histogram(&common, &labels, predicted_suffix.as_deref(), &inputs),
        Command::ExtractReference { common, inputs } => commands::extract_reference(&common, &inputs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
