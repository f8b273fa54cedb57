//! `evtag` command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad data, failed
//! precondition), 2 on a usage error. Diagnostics go to standard error;
//! results go to files or standard output.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "evtag",
    version,
    about = "Protest event tagging and fine-tuning stability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Three seeds written as `global,data_order,head_init`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTriple(pub u64, pub u64, pub u64);

fn parse_seeds(s: &str) -> Result<SeedTriple, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [g, d, h] = parts.as_slice() else {
        return Err(format!("expected three comma-separated seeds, got `{s}`"));
    };
    let num = |x: &str| x.parse::<u64>().map_err(|e| format!("seed `{x}`: {e}"));
    Ok(SeedTriple(num(g)?, num(d)?, num(h)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Tpe,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a snippet file for BIO violations.
    Validate {
        file: PathBuf,
        #[arg(long, default_value = "event")]
        tagset: String,
    },
    /// Generate a synthetic snippet corpus.
    Synth {
        /// JSON profile: {"language": "en", "n_snippets": 200, "tagset": "event"}.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a tagger or document classifier and write a checkpoint.
    Train {
        /// Snippet file, or JSON Lines records for classification.
        #[arg(long)]
        data: PathBuf,
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedTriple,
        #[arg(long)]
        out: PathBuf,
        /// Held-out data scored after every epoch.
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Vocabulary file; built from the training words when absent.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Pretrain the auxiliary tagger whose body seeds behavioral fine-tuning.
    PretrainAux {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON run configuration; defaults to one epoch at learning rate 1e-5.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_seeds, default_value = "0,0,0")]
        seeds: SeedTriple,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Tag a snippet file with a trained tagger.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Must match the vocabulary stored in the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify JSON Lines documents with a trained classifier.
    Classify {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entity-level scores of predicted against gold snippets.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write the full per-class report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value = "event")]
        tagset: String,
    },
    /// Run the seed stability suite described by a JSON configuration.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hyperparameter search scored by eval macro-F1.
    Hpo {
        /// JSON search space.
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        init: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Snippet file split 60/20/20; a synthetic English corpus when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// JSON run configuration for the model and the fixed training fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tpe")]
        sampler: SamplerArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { file, tagset } => commands::validate(&file, &tagset),
        Command::Synth { profile, seed, out } => commands::synth(&profile, seed, &out),
        Command::Train {
            data,
            config,
            seeds,
            out,
            eval,
            vocab,
        } => commands::train(&data, &config, seeds, &out, eval.as_deref(), vocab.as_deref()),
        Command::PretrainAux {
            data,
            out,
            config,
            seeds,
            vocab,
        } => commands::pretrain_aux(&data, &out, config.as_deref(), seeds, vocab.as_deref()),
        Command::Predict { ckpt, data, vocab, out } => commands::predict(&ckpt, &data, vocab.as_deref(), &out),
        Command::Classify { ckpt, data, out } => commands::classify(&ckpt, &data, &out),
        Command::Score {
            gold,
            pred,
            json,
            tagset,
        } => commands::score(&gold, &pred, json.as_deref(), &tagset),
        Command::Stability { config, out } => commands::stability(&config, &out),
        Command::Hpo {
            space,
            trials,
            init,
            seed,
            out,
            data,
            config,
            sampler,
        } => commands::hpo(&commands::HpoArgs {
            space: &space,
            trials,
            init,
            seed,
            out: &out,
            data: data.as_deref(),
            config: config.as_deref(),
            sampler,
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
