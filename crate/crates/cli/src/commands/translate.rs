use std::path::{Path, PathBuf};

use dieta::data::{read_lines, Direction};
use dieta::decoder::{translate_lines, DecodeParams};
use dieta::model::DietaModel;
use dieta::tokenizer::Vocab;
use dieta::{DType, Result};

use super::{emit_lines, precision, resolve};
use crate::config::RunConfig;
use crate::{flags, kv, Global};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Model checkpoint
    #[arg(long)]
    model: Option<PathBuf>,
    /// Vocabulary file
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Source sentences, one per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Translations (stdout if unset)
    #[arg(long)]
    output: Option<PathBuf>,
    /// en-it or it-en
    #[arg(long)]
    direction: Option<String>,
    /// Beam width; 1 is greedy, 5 gives the "-b5" systems
    #[arg(long)]
    beam: Option<usize>,
    /// Length-normalization exponent for beam search
    #[arg(long)]
    length_penalty: Option<f64>,
    /// Generation budget per sentence in tokens
    #[arg(long)]
    max_new_tokens: Option<usize>,
}

pub fn decode_defaults() -> dieta::kv::KvMap {
    let d = DecodeParams::default();
    kv! {
        "model" => "", "vocab" => "", "beam" => d.beam_width,
        "length_penalty" => format!("{:?}", d.length_penalty), "max_new_tokens" => d.max_new_tokens,
    }
}

pub fn decode_params(cfg: &RunConfig) -> Result<DecodeParams> {
    let p = DecodeParams {
        beam_width: cfg.get("beam")?,
        length_penalty: cfg.get("length_penalty")?,
        max_new_tokens: cfg.get("max_new_tokens")?,
        ..DecodeParams::default()
    };
    p.validate()?;
    Ok(p)
}

/// Loads the model at the configured precision and translates `lines`.
pub fn run_model(cfg: &RunConfig, model: &Path, vocab: &Vocab, lines: &[String], direction: Direction) -> Result<Vec<String>> {
    let params = decode_params(cfg)?;
    let workers = cfg.get("workers")?;
    match precision(cfg)? {
        DType::F32 => translate_lines(&DietaModel::<f32>::load(model)?, vocab, lines, direction, &params, workers),
        DType::F64 => translate_lines(&DietaModel::<f64>::load(model)?, vocab, lines, direction, &params, workers),
    }
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let mut defaults = decode_defaults();
    defaults.merge(&kv! { "input" => "", "output" => "", "direction" => "en-it" });
    let mut f = kv! {};
    flags!(f, a; model, vocab, input, output, direction, beam, length_penalty, max_new_tokens);
    let cfg = resolve("translate", g, defaults, f)?;
    let vocab = Vocab::load(&cfg.require_path("vocab")?)?;
    let lines = read_lines(&cfg.require_path("input")?)?;
    let out = run_model(&cfg, &cfg.require_path("model")?, &vocab, &lines, super::direction(&cfg)?)?;
    emit_lines(cfg.path("output").as_deref(), &out)
}
