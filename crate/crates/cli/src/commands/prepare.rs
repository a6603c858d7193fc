use std::path::PathBuf;
use std::time::Duration;

use dieta::data::{prepare, read_aligned, read_tsv, write_rejections, HttpJudge, Judge, Stub, JUDGE_URL_ENV};
use dieta::{Error, Result};

use super::{client_defaults, emit_lines, resolve, retry_policy};
use crate::config::join_paths;
use crate::{flags, kv, Global};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// English side of a line-aligned corpus
    #[arg(long)]
    en: Option<PathBuf>,
    /// Italian side of a line-aligned corpus
    #[arg(long)]
    it: Option<PathBuf>,
    /// Tab-separated pair file (english, italian[, tag[, synthetic side]]); repeatable
    #[arg(long)]
    tsv: Vec<PathBuf>,
    /// Provenance tag for aligned input
    #[arg(long)]
    tag: Option<String>,
    /// Output file of formatted, shuffled samples (stdout if unset)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the statistics table here
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write rejected pairs here
    #[arg(long)]
    rejections: Option<PathBuf>,
    /// Run the judge filter
    #[arg(long)]
    filter: bool,
    /// Judge endpoint (or stub:yes, stub:reject=<text>, ...)
    #[arg(long)]
    judge_url: Option<String>,
    /// Per-request timeout in seconds
    #[arg(long)]
    timeout_secs: Option<u64>,
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let mut defaults = kv! {
        "en" => "", "it" => "", "tsv" => "", "tag" => "human", "output" => "",
        "stats" => "", "rejections" => "", "filter" => false,
    };
    defaults.merge(&client_defaults("judge_url", JUDGE_URL_ENV));
    let mut f = kv! {};
    flags!(f, a; en, it, tag, output, stats, rejections, judge_url, timeout_secs);
    if let Some(t) = join_paths(&a.tsv) {
        f.set("tsv", t);
    }
    if a.filter {
        f.set("filter", true);
    }
    let cfg = resolve("prepare", g, defaults, f)?;

    let tag: String = cfg.get("tag")?;
    let mut pairs = Vec::new();
    match (cfg.path("en"), cfg.path("it")) {
        (Some(en), Some(it)) => {
            let (p, stats) = read_aligned(&en, &it, &tag)?;
            log::info!("read {} aligned lines ({} blank)", stats.lines, stats.blank);
            pairs.extend(p);
        }
        (None, None) => {}
        _ => return Err(Error::Config("--en and --it must be given together".into())),
    }
    for path in cfg.list("tsv") {
        let (p, stats) = read_tsv(path.as_ref(), &tag)?;
        log::info!("read {} lines from {path} ({} blank)", stats.lines, stats.blank);
        pairs.extend(p);
    }
    if pairs.is_empty() && cfg.path("en").is_none() && cfg.list("tsv").is_empty() {
        return Err(Error::Config("no input: give --en/--it or --tsv".into()));
    }

    let judge: Option<Box<dyn Judge + Sync>> = if cfg.get("filter")? {
        let url = cfg
            .str("judge_url")
            .ok_or_else(|| Error::Config(format!("filtering needs --judge-url or {JUDGE_URL_ENV}")))?;
        Some(match Stub::parse(url) {
            Some(stub) => Box::new(stub),
            None => Box::new(HttpJudge::new(url, Duration::from_secs(cfg.get("timeout_secs")?))),
        })
    } else {
        None
    };
    let out = prepare(pairs, judge.as_deref(), &retry_policy(&cfg)?, cfg.get("workers")?, cfg.get("seed")?)?;

    let lines: Vec<String> = out.samples.into_iter().map(|s| s.text).collect();
    emit_lines(cfg.path("output").as_deref(), &lines)?;
    if let Some(p) = cfg.path("rejections") {
        write_rejections(&p, &out.rejections)?;
    }
    let table = out.stats.to_tsv();
    if let Some(p) = cfg.path("stats") {
        std::fs::write(p, &table)?;
    }
    if cfg.path("output").is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}
