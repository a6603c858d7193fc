use std::path::{Path, PathBuf};
use std::time::Duration;

use dieta::data::read_lines;
use dieta::metrics::{
    bleu_with, chrf, render_report, score_external, BleuConfig, ChrfScore, EvalSet, HttpScorer, MetricReport,
    MetricValue, Scorer, Smoothing, StubScorer, SCORER_URL_ENV,
};
use dieta::{Error, Result};

use super::resolve;
use crate::config::{env_or_empty, RunConfig};
use crate::{flags, kv, Global};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Hypothesis file, optionally named: SYSTEM=PATH; repeatable
    #[arg(long)]
    hyp: Vec<String>,
    /// Reference file
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Source file, needed by external scorers
    #[arg(long)]
    src: Option<PathBuf>,
    /// english<TAB>italian test set supplying sources and references
    #[arg(long)]
    eval_set: Option<PathBuf>,
    /// en-it or it-en
    #[arg(long)]
    direction: Option<String>,
    /// BLEU smoothing: exp or none
    #[arg(long)]
    smooth: Option<String>,
    /// Reference-based external scorer, NAME or NAME=URL; repeatable
    #[arg(long)]
    scorer: Vec<String>,
    /// Reference-free external scorer, NAME or NAME=URL; repeatable
    #[arg(long)]
    qe_scorer: Vec<String>,
    /// Default endpoint for external scorers (stub:<value> and stub:fail work offline)
    #[arg(long)]
    scorer_url: Option<String>,
    /// Write the leaderboard as TSV here
    #[arg(long)]
    report: Option<PathBuf>,
    /// Leaderboard format on stdout: text or tsv
    #[arg(long)]
    format: Option<String>,
    /// Per-request timeout in seconds
    #[arg(long)]
    timeout_secs: Option<u64>,
}

fn named(spec: &str) -> (String, String) {
    match spec.split_once('=') {
        Some((n, v)) => (n.to_string(), v.to_string()),
        None => {
            let stem = Path::new(spec).file_stem().map(|s| s.to_string_lossy().into_owned());
            (stem.unwrap_or_else(|| spec.to_string()), spec.to_string())
        }
    }
}

fn make_scorer(name: &str, url: &str, reference_based: bool, timeout: Duration) -> Result<Box<dyn Scorer>> {
    if let Some(stub) = url.strip_prefix("stub:") {
        let s = if stub == "fail" {
            StubScorer::failing(name)
        } else {
            let v = stub
                .parse()
                .map_err(|_| Error::Config(format!("stub scorer needs a number or fail, got {stub:?}")))?;
            StubScorer::constant(name, v)
        };
        return Ok(Box::new(s.reference_based(reference_based)));
    }
    Ok(Box::new(HttpScorer::new(name, url, reference_based, timeout)))
}

pub fn run(a: &Args, g: &Global) -> Result<()> {
    let defaults = kv! {
        "hyp" => "", "ref" => "", "src" => "", "eval_set" => "", "direction" => "en-it", "smooth" => "exp",
        "scorer" => "", "qe_scorer" => "", "scorer_url" => env_or_empty(SCORER_URL_ENV),
        "report" => "", "format" => "text", "timeout_secs" => 60,
    };
    let mut f = kv! {};
    flags!(f, a; src, eval_set, direction, smooth, scorer_url, report, format, timeout_secs);
    if let Some(r) = &a.reference {
        f.set("ref", r.display());
    }
    for (key, list) in [("hyp", &a.hyp), ("scorer", &a.scorer), ("qe_scorer", &a.qe_scorer)] {
        if !list.is_empty() {
            f.set(key, list.join(","));
        }
    }
    let cfg = resolve("eval", g, defaults, f)?;
    let direction = super::direction(&cfg)?;

    let (sources, references) = match cfg.path("eval_set") {
        Some(p) => {
            let set = EvalSet::from_tsv(&p)?;
            (Some(set.sources(direction).to_vec()), set.references(direction).to_vec())
        }
        None => (
            cfg.path("src").map(|p| read_lines(&p)).transpose()?,
            read_lines(&cfg.require_path("ref")?)?,
        ),
    };
    let hyps = cfg.list("hyp");
    if hyps.is_empty() {
        return Err(Error::Config("missing required setting hyp (flag --hyp)".into()));
    }
    let bleu_cfg = BleuConfig {
        smoothing: match cfg.get::<String>("smooth")?.as_str() {
            "exp" => Smoothing::Exp,
            "none" => Smoothing::None,
            other => return Err(Error::Config(format!("smooth must be exp or none, got {other:?}"))),
        },
        lowercase: false,
    };
    let scorers = external_scorers(&cfg)?;

    let mut reports = Vec::new();
    for spec in &hyps {
        let (system, path) = named(spec);
        let lines = read_lines(Path::new(&path))?;
        let b = bleu_with(&lines, &references, &bleu_cfg)?;
        let c = chrf(&lines, &references)?;
        println!("{system}\t{}\tBLEU {:.2}\tchrF {:.2}", direction.code(), b.score, c.score);
        let mut report = MetricReport::new(&system, direction);
        report
            .set("bleu", MetricValue::Score(b.score))
            .set("chrf", MetricValue::Score(c.score))
            .sign("BLEU", &bleu_cfg.signature())
            .sign("chrF2", ChrfScore::SIGNATURE);
        for s in &scorers {
            let src = sources
                .as_deref()
                .ok_or_else(|| Error::Config(format!("scorer {} needs --src or --eval-set", s.name())))?;
            let refs = s.reference_based().then_some(references.as_slice());
            let out = score_external(&lines, src, refs, s.as_ref())?;
            report.set(&out.scorer, out.value);
        }
        reports.push(report);
    }
    let table = render_report(&reports);
    if let Some(p) = cfg.path("report") {
        std::fs::write(p, table.to_tsv())?;
    }
    match cfg.get::<String>("format")?.as_str() {
        "tsv" => print!("{}", table.to_tsv()),
        "text" => print!("{}", table.to_text()),
        other => return Err(Error::Config(format!("format must be text or tsv, got {other:?}"))),
    }
    Ok(())
}

fn external_scorers(cfg: &RunConfig) -> Result<Vec<Box<dyn Scorer>>> {
    let timeout = Duration::from_secs(cfg.get("timeout_secs")?);
    let mut out = Vec::new();
    for (key, reference_based) in [("scorer", true), ("qe_scorer", false)] {
        for spec in cfg.list(key) {
            let (name, url) = match spec.split_once('=') {
                Some((n, u)) => (n.to_string(), u.to_string()),
                None => {
                    let url = cfg.str("scorer_url").ok_or_else(|| {
                        Error::Config(format!("scorer {spec} needs NAME=URL, --scorer-url or {SCORER_URL_ENV}"))
                    })?;
                    (spec.clone(), url.to_string())
                }
            };
            out.push(make_scorer(&name, &url, reference_based, timeout)?);
        }
    }
    Ok(out)
}
