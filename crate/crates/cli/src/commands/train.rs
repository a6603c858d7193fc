use std::path::PathBuf;

use dieta::data::read_lines;
use dieta::kv::KvMap;
use dieta::model::ModelConfig;
use dieta::tokenizer::Vocab;
use dieta::trainer::{make_batches, train, RecipeName, TrainOptions, TrainRecipe, PAPER_PEAK_LR, PAPER_WARMUP_FRACTION};
use dieta::{DType, Error, Result};

use super::{precision, resolve};
use crate::{flags, kv, Global};

const MODEL_KEYS: [&str; 8] = [
    "vocab_size", "d_model", "n_heads", "n_layers", "ffn_multiplier", "rope_base", "max_seq_len", "tie_output",
];

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Formatted training samples, one per line
    #[arg(long)]
    data: Option<PathBuf>,
    /// Vocabulary file
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long)]
    output: Option<PathBuf>,
    /// DIETA, +BT, +cont, +nosynth or +allsynth
    #[arg(long)]
    recipe: Option<String>,
    /// Architecture preset: desk or paper
    #[arg(long)]
    preset: Option<String>,
    /// Model vocabulary rows (defaults to the tokenizer size)
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Model width
    #[arg(long)]
    d_model: Option<usize>,
    /// Attention heads per layer
    #[arg(long)]
    n_heads: Option<usize>,
    /// Decoder layers
    #[arg(long)]
    n_layers: Option<usize>,
    /// Feed-forward width as a multiple of the model width
    #[arg(long)]
    ffn_multiplier: Option<usize>,
    /// Rotary embedding base frequency
    #[arg(long)]
    rope_base: Option<f64>,
    /// Longest sequence in tokens
    #[arg(long)]
    max_seq_len: Option<usize>,
    /// Share the embedding matrix with the output head (true/false)
    #[arg(long)]
    tie_output: Option<bool>,
    /// Total optimizer updates (defaults to one pass per epoch)
    #[arg(long)]
    steps: Option<usize>,
    /// Epochs when --steps is not given
    #[arg(long)]
    epochs: Option<u32>,
    /// Peak learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Share of steps spent warming up
    #[arg(long)]
    warmup_fraction: Option<f64>,
    /// Learning rate reached at the last step
    #[arg(long)]
    floor_lr: Option<f64>,
    /// Padded-token budget per batch
    #[arg(long)]
    batch_tokens: Option<usize>,
    /// Starting checkpoint for continued recipes
    #[arg(long)]
    init_from: Option<PathBuf>,
    /// Resume an interrupted run from its checkpoint
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Save a resumable checkpoint every N steps
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Per-step TSV log
    #[arg(long)]
    metrics_log: Option<PathBuf>,
    /// Stop after this many updates in this invocation
    #[arg(long)]
    max_steps: Option<usize>,
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let mut defaults = kv! {
        "data" => "", "vocab" => "", "output" => "", "recipe" => "DIETA", "preset" => "desk",
        "steps" => "", "epochs" => 1, "lr" => format!("{PAPER_PEAK_LR:?}"),
        "warmup_fraction" => format!("{PAPER_WARMUP_FRACTION:?}"), "floor_lr" => "0.0",
        "batch_tokens" => 2048, "init_from" => "", "resume" => "", "checkpoint_every" => "",
        "metrics_log" => "", "max_steps" => "",
    };
    for k in MODEL_KEYS {
        defaults.set(k, "");
    }
    let mut f = kv! {};
    flags!(f, a; data, vocab, output, recipe, preset, vocab_size, d_model, n_heads, n_layers,
        ffn_multiplier, rope_base, max_seq_len, tie_output, steps, epochs, lr, warmup_fraction,
        floor_lr, batch_tokens, max_steps, checkpoint_every, init_from, resume, metrics_log);
    let cfg = resolve("train", g, defaults, f)?;

    let vocab = Vocab::load(&cfg.require_path("vocab")?)?;
    let base = match cfg.get::<String>("preset")?.as_str() {
        "desk" => ModelConfig::desk(),
        "paper" => ModelConfig::paper(),
        other => return Err(Error::Config(format!("unknown preset {other:?} (expected desk or paper)"))),
    };
    let mut overrides = KvMap::new();
    overrides.set("vocab_size", vocab.len());
    for k in MODEL_KEYS {
        if let Some(v) = cfg.str(k) {
            overrides.set(k, v);
        }
    }
    let model = ModelConfig::overlay(&base, &overrides)?;
    if model.vocab_size < vocab.len() {
        return Err(Error::Config(format!(
            "model vocab_size {} is smaller than the tokenizer ({})",
            model.vocab_size,
            vocab.len()
        )));
    }
    for (k, v) in model.to_kv().iter() {
        log::info!("model {k}={v}");
    }

    let mut recipe = TrainRecipe::preset(cfg.get::<RecipeName>("recipe")?);
    recipe.epochs = cfg.get("epochs")?;
    let mut opts = TrainOptions::new(recipe, model.clone(), cfg.require_path("output")?);
    opts.peak_lr = cfg.get("lr")?;
    opts.warmup_fraction = cfg.get("warmup_fraction")?;
    opts.floor_lr = cfg.get("floor_lr")?;
    opts.total_steps = cfg.opt("steps")?;
    opts.seed = cfg.get("seed")?;
    opts.init_from = cfg.path("init_from");
    opts.resume_from = cfg.path("resume");
    opts.checkpoint_every = cfg.opt("checkpoint_every")?;
    opts.metrics_log = cfg.path("metrics_log");
    opts.max_steps_this_run = cfg.opt("max_steps")?;

    let samples = read_lines(&cfg.require_path("data")?)?;
    let (batches, stats) = make_batches(&samples, &vocab, cfg.get("batch_tokens")?, model.max_seq_len)?;
    log::info!(
        "{} samples, {} tokens, {} batches ({} truncated, {} dropped)",
        stats.samples,
        stats.tokens,
        batches.len(),
        stats.truncated,
        stats.dropped
    );
    let summary = match precision(&cfg)? {
        DType::F32 => train::<f32>(&opts, batches)?,
        DType::F64 => train::<f64>(&opts, batches)?,
    };
    if !summary.dead_parameters.is_empty() {
        log::warn!("parameters without gradient: {}", summary.dead_parameters.join(", "));
    }
    println!("steps\t{}", summary.steps);
    if let (Some(first), Some(last)) = (summary.first_loss, summary.last_loss) {
        println!("first_loss\t{first:.6}");
        println!("last_loss\t{last:.6}");
    }
    println!("checkpoint\t{}", opts.output.display());
    Ok(())
}
