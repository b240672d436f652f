//! Command-line workflows for joint neural translation and parsing:
//! preprocess -> train -> translate -> eval, plus a gradient-check gate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 validation failure.

mod cmd_eval;
mod cmd_gradcheck;
mod cmd_preprocess;
mod cmd_train;
mod cmd_translate;
mod config;
mod error;
mod fsio;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "parslate",
    version,
    about = "Attention-based translation with a transition-parsing decoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build vocabularies, encode the corpus, and derive action sequences.
    Preprocess(cmd_preprocess::Args),
    /// Train the joint model with the perplexity-driven schedule.
    Train(cmd_train::Args),
    /// Translate with beam search; optionally parse jointly.
    Translate(cmd_translate::Args),
    /// Score translations (BLEU, RIBES, paired bootstrap).
    Eval(cmd_eval::Args),
    /// Verify gradients against finite differences on a tiny model.
    Gradcheck(cmd_gradcheck::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's help/version output exits cleanly; bad flags are usage
            // errors.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Preprocess(args) => cmd_preprocess::run(args),
        Command::Train(args) => cmd_train::run(args),
        Command::Translate(args) => cmd_translate::run(args),
        Command::Eval(args) => cmd_eval::run(args),
        Command::Gradcheck(args) => cmd_gradcheck::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
