//! `dieta`: data preparation, tokenizer and model training, translation,
//! back-translation and evaluation from one binary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{backtranslate, eval, prepare, tokenizer, train, translate};

#[derive(Parser, Debug)]
#[command(name = "dieta", version, about = "Italian-English decoder-only translation pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand.
#[derive(clap::Args, Debug, Clone)]
pub struct Global {
    /// key=value configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for initialization and shuffling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for filtering, back-translation and decoding
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Floating-point precision: f32 or f64
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Only log warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deduplicate, optionally filter, template and shuffle a parallel corpus
    Prepare(prepare::Args),
    /// Train a byte-level BPE vocabulary
    TrainTokenizer(tokenizer::Args),
    /// Train or continue a model
    Train(train::Args),
    /// Translate a file line by line
    Translate(translate::Args),
    /// Create synthetic pairs from monolingual text
    Backtranslate(backtranslate::Args),
    /// Score hypotheses and render a leaderboard
    Eval(eval::Args),
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if line.starts_with("error:") {
                    eprintln!("{line}");
                } else {
                    eprintln!("error: {}", line.trim());
                }
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Prepare(a) => prepare::run(&a, &cli.global),
        Command::TrainTokenizer(a) => tokenizer::run(&a, &cli.global),
        Command::Train(a) => train::run(&a, &cli.global),
        Command::Translate(a) => translate::run(&a, &cli.global),
        Command::Backtranslate(a) => backtranslate::run(&a, &cli.global),
        Command::Eval(a) => eval::run(&a, &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for (i, line) in e.to_string().lines().enumerate() {
                eprintln!("error: {}{line}", if i > 0 { "  " } else { "" });
            }
            ExitCode::from(match e {
                dieta::Error::Config(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            })
        }
    }
}
