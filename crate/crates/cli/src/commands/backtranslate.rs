use std::path::PathBuf;
use std::time::Duration;

use dieta::data::{backtranslate, read_lines, write_pairs_tsv, HttpTranslator, Stub, Translator, MT_URL_ENV};
use dieta::decoder::ModelTranslator;
use dieta::model::DietaModel;
use dieta::tokenizer::Vocab;
use dieta::{DType, Error, Result};

use super::translate::{decode_defaults, decode_params};
use super::{client_defaults, precision, resolve, retry_policy};
use crate::{flags, kv, Global};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Monolingual human text, one sentence per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Synthetic pairs as TSV (english, italian, tag, synthetic side)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Translation direction applied to the input: it-en for Italian text
    #[arg(long)]
    direction: Option<String>,
    /// Translation endpoint (or stub:identity, stub:upper, ...)
    #[arg(long)]
    mt_url: Option<String>,
    /// Use a local checkpoint instead of an endpoint
    #[arg(long)]
    model: Option<PathBuf>,
    /// Vocabulary for --model
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    beam: Option<usize>,
    /// Write failed lines (position and error) here
    #[arg(long)]
    failures: Option<PathBuf>,
    /// Per-request timeout in seconds
    #[arg(long)]
    timeout_secs: Option<u64>,
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let mut defaults = decode_defaults();
    defaults.merge(&client_defaults("mt_url", MT_URL_ENV));
    defaults.merge(&kv! { "input" => "", "output" => "", "direction" => "it-en", "failures" => "" });
    let mut f = kv! {};
    flags!(f, a; input, output, direction, mt_url, model, vocab, beam, failures, timeout_secs);
    let cfg = resolve("backtranslate", g, defaults, f)?;

    let lines = read_lines(&cfg.require_path("input")?)?;
    let direction = super::direction(&cfg)?;
    let policy = retry_policy(&cfg)?;
    let workers = cfg.get("workers")?;
    let outcome = if let Some(model_path) = cfg.path("model") {
        let vocab = Vocab::load(&cfg.require_path("vocab")?)?;
        let params = decode_params(&cfg)?;
        match precision(&cfg)? {
            DType::F32 => {
                let model = DietaModel::<f32>::load(&model_path)?;
                let mt = ModelTranslator { model: &model, vocab: &vocab, params };
                backtranslate(&lines, &mt, direction, &policy, workers)
            }
            DType::F64 => {
                let model = DietaModel::<f64>::load(&model_path)?;
                let mt = ModelTranslator { model: &model, vocab: &vocab, params };
                backtranslate(&lines, &mt, direction, &policy, workers)
            }
        }
    } else {
        let url = cfg
            .str("mt_url")
            .ok_or_else(|| Error::Config(format!("back-translation needs --model, --mt-url or {MT_URL_ENV}")))?;
        let mt: Box<dyn Translator + Sync> = match Stub::parse(url) {
            Some(stub) => Box::new(stub),
            None => Box::new(HttpTranslator::new(url, Duration::from_secs(cfg.get("timeout_secs")?))),
        };
        backtranslate(&lines, mt.as_ref(), direction, &policy, workers)
    };
    write_pairs_tsv(&cfg.require_path("output")?, &outcome.pairs)?;
    if let Some(p) = cfg.path("failures") {
        let rows: Vec<String> = outcome
            .failures
            .iter()
            .map(|f| format!("{}\t{}", f.position, f.error.replace(['\t', '\n'], " ")))
            .collect();
        dieta::data::write_lines(&p, &rows)?;
    }
    println!("pairs\t{}", outcome.pairs.len());
    println!("failures\t{}", outcome.failures.len());
    println!("blank\t{}", outcome.blank);
    Ok(())
}
