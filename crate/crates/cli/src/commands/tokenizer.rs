use std::path::PathBuf;

use dieta::data::read_lines;
use dieta::tokenizer::{train_bpe, DEFAULT_VOCAB_SIZE};
use dieta::Result;

use super::resolve;
use crate::{flags, kv, Global};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Training text, one sample per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Target vocabulary size including specials and byte pieces
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Keep all 256 byte pieces so any input can be encoded (true/false)
    #[arg(long)]
    byte_fallback: Option<bool>,
    /// Vocabulary file to write
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let defaults = kv! {
        "input" => "", "vocab_size" => DEFAULT_VOCAB_SIZE, "byte_fallback" => true, "output" => "",
    };
    let mut f = kv! {};
    flags!(f, a; input, vocab_size, byte_fallback, output);
    let cfg = resolve("train-tokenizer", g, defaults, f)?;
    let input = cfg.require_path("input")?;
    let output = cfg.require_path("output")?;
    let lines = read_lines(&input)?;
    let vocab = train_bpe(&lines, cfg.get("vocab_size")?, cfg.get("byte_fallback")?)?;
    vocab.save(&output)?;
    println!("vocab_size\t{}", vocab.len());
    println!("merges\t{}", vocab.merges().len());
    Ok(())
}
