//! `voxanon` command line: anonymize audio or embeddings, evaluate scores
//! and transcripts, validate pseudo-speaker mappings, reformat result tables.
//!
//! Exit codes: 0 success, 1 operational failure (per-file errors, metric
//! reconciliation problems, rule violations), 2 configuration/parse errors.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Default RNG seed comes from this variable when `--seed` is not given.
pub const SEED_ENV_VAR: &str = "VOXANON_SEED";

#[derive(Debug)]
pub enum Failure {
    /// Exit 1: the run happened but something went wrong.
    Operational(String),
    /// Exit 2: inputs or flags are unusable.
    Config(String),
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "voxanon",
    version,
    about = "Speech anonymization and evaluation toolkit"
)]
struct Cli {
    /// Suppress the effective-configuration line on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anonymize a corpus of WAV files by LPC pole-angle warping.
    Anonymize(commands::AnonymizeArgs),
    /// Anonymize speaker embeddings by farthest-pool averaging.
    AnonEmbed(commands::AnonEmbedArgs),
    /// Compute EER, min-Cllr and Cllr from a score file and trial list.
    EvalAsv(commands::EvalAsvArgs),
    /// Compute corpus WER from reference and hypothesis transcripts.
    EvalAsr(commands::EvalAsrArgs),
    /// Check a pseudo-speaker mapping against the consistency rules.
    Validate(commands::ValidateArgs),
    /// Re-emit a plain results table, optionally as LaTeX rows.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Anonymize(args) => commands::anonymize(args, cli.quiet),
        Command::AnonEmbed(args) => commands::anon_embed(args, cli.quiet),
        Command::EvalAsv(args) => commands::eval_asv(args, cli.quiet),
        Command::EvalAsr(args) => commands::eval_asr(args, cli.quiet),
        Command::Validate(args) => commands::validate(args, cli.quiet),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Operational(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
