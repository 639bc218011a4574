// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jitdp::config::{Combine, ModalityChoice, TextMode};
use jitdp::{pipeline, Overrides, PipelineConfig, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "jitdp", version, about = "Just-in-time defect prediction from a git history")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Local git repository to mine.
    #[arg(long, global = true, value_name = "PATH")]
    repo: Option<PathBuf>,
    /// Directory holding every stage's artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for the split and for model initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Train:validation:test ratios, e.g. 8:1:1.
    #[arg(long, global = true, value_name = "A:B:C")]
    ratios: Option<String>,
    #[arg(long, global = true, value_enum)]
    combine: Option<Combine>,
    /// Restrict the model to one input group (for ablations).
    #[arg(long, global = true, value_enum)]
    modalities: Option<ModalityChoice>,
    /// Text features from the hashing featurizer or an embedding file.
    #[arg(long, global = true, value_enum)]
    text: Option<TextMode>,
    /// Embedding JSONL file; implies --text embeddings.
    #[arg(long, global = true, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Mine commits and compute change metrics.
    #[command(after_help = Stage::keys_help(&[Stage::Mine]))]
    Mine,
    /// Label defect-inducing commits with SZZ.
    #[command(after_help = Stage::keys_help(&[Stage::Label]))]
    Label,
    /// Clean the labelled commits and attach text vectors.
    #[command(after_help = Stage::keys_help(&[Stage::Featurize]))]
    Featurize,
    /// Split the dataset and fit feature statistics on the training part.
    #[command(after_help = Stage::keys_help(&[Stage::Split]))]
    Split,
    /// Train a fusion model.
    #[command(after_help = Stage::keys_help(&[Stage::Train]))]
    Train,
    /// Evaluate the trained model.
    #[command(after_help = Stage::keys_help(&[Stage::Evaluate]))]
    Evaluate,
    /// Run every stage in order.
    #[command(after_help = Stage::keys_help(&Stage::ALL))]
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Mine => "mine",
            Command::Label => "label",
            Command::Featurize => "featurize",
            Command::Split => "split",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::All => "all",
        }
    }
}

fn config(flags: Flags) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &flags.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    Overrides {
        repo: flags.repo,
        out: flags.out,
        seed: flags.seed,
        ratios: flags.ratios,
        combine: flags.combine,
        modalities: flags.modalities,
        text: flags.text,
        embeddings: flags.embeddings,
        jobs: flags.jobs,
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn run(command: Command, cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let out = cfg.general.out.display();
    Ok(match command {
        Command::Mine => {
            let s = pipeline::mine(cfg)?;
            format!("mined {} commits ({} with source changes) into {out}", s.commits, s.eligible)
        }
        Command::Label => {
            let s = pipeline::label(cfg)?;
            format!(
                "traced {} fixes: {} defect-inducing commits, {} warnings",
                s.fixes, s.positives, s.warnings
            )
        }
        Command::Featurize => {
            let s = pipeline::featurize(cfg)?;
            format!(
                "{} instances ({} defective), text dimension {}",
                s.instances, s.positives, s.text_dim
            )
        }
        Command::Split => {
            let s = pipeline::split(cfg)?;
            format!("train {} / val {} / test {}", s.train, s.val, s.test)
        }
        Command::Train => {
            let s = pipeline::train(cfg)?;
            format!(
                "best epoch {} of {} (validation F1 {:.4})",
                s.best_epoch + 1,
                s.epochs,
                s.best_val_f1
            )
        }
        Command::Evaluate | Command::All => {
            let r = if matches!(command, Command::All) {
                pipeline::all(cfg)?
            } else {
                pipeline::evaluate(cfg)?
            };
            format!(
                "{} on {} {}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} pr_auc {:.4}",
                r.combine_method.as_str(),
                r.instances,
                r.part,
                r.accuracy,
                r.precision,
                r.recall,
                r.f1,
                r.pr_auc
            )
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JITDP_LOG", "warn")).init();
    let cli = Cli::parse();
    let command = cli.command;
    match config(cli.flags).and_then(|cfg| run(command, &cfg)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({
                "error": {
                    "stage": command.name(),
                    "kind": e.kind(),
                    "message": e.to_string(),
                }
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
