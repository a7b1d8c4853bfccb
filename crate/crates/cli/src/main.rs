//! `domtok`: staged command-line pipeline for domain tokenizer adaptation.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory, and persists its effective configuration as
//! `<command>.config.json` there.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "domtok",
    version,
    about = "Adapt a subword tokenizer to a domain corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build or load the baseline tokenizer and write the gain table.
    Analyze,
    /// Select candidate words by gain threshold or heuristic score.
    Select,
    /// Train the heuristic scorer on annotated words.
    TrainPhi,
    /// Extend the baseline tokenizer with selected words and measure savings.
    Augment,
    /// Train baseline and augmented language models and compare them.
    Lm,
    /// Bundle stage outputs into a report directory.
    Report,
    /// Show a text tokenized by both tokenizers side by side.
    Demo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Select => "select",
            Command::TrainPhi => "train-phi",
            Command::Augment => "augment",
            Command::Lm => "lm",
            Command::Report => "report",
            Command::Demo => "demo",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.overrides.resolve().and_then(|config| {
        let name = match cli.command {
            Command::Select => format!("select-{}", config.mode.name()),
            other => other.name().to_owned(),
        };
        config.persist(&name)?;
        match cli.command {
            Command::Analyze => commands::analyze(&config),
            Command::Select => commands::select(&config),
            Command::TrainPhi => commands::train_phi(&config),
            Command::Augment => commands::augment(&config),
            Command::Lm => commands::lm(&config),
            Command::Report => commands::report(&config),
            Command::Demo => commands::demo(&config),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
