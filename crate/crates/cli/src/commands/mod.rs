pub mod backtranslate;
pub mod eval;
pub mod prepare;
pub mod tokenizer;
pub mod train;
pub mod translate;

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use dieta::data::{Direction, RetryPolicy};
use dieta::kv::KvMap;
use dieta::{DType, Error, Result};

use crate::config::{RunConfig, env_or_empty};
use crate::{kv, Global};

/// Defaults every command shares, overlaid by the global flags.
pub fn resolve(command: &'static str, g: &Global, mut defaults: KvMap, flags: KvMap) -> Result<RunConfig> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut base = kv! { "seed" => 0, "workers" => workers, "precision" => "f32" };
    base.merge(&defaults);
    defaults = base;
    let mut all = flags;
    crate::flags!(all, g; seed, workers, precision);
    let cfg = RunConfig::resolve(command, defaults, g.config.as_deref(), &all)?;
    cfg.log();
    Ok(cfg)
}

pub fn precision(cfg: &RunConfig) -> Result<DType> {
    let p = cfg.get::<String>("precision")?;
    DType::parse(&p).ok_or_else(|| Error::Config(format!("precision must be f32 or f64, got {p:?}")))
}

pub fn direction(cfg: &RunConfig) -> Result<Direction> {
    cfg.get("direction")
}

pub fn retry_policy(cfg: &RunConfig) -> Result<RetryPolicy> {
    Ok(RetryPolicy {
        retries: cfg.get("retries")?,
        backoff: std::time::Duration::from_millis(cfg.get("backoff_ms")?),
    })
}

pub fn client_defaults(url_key: &str, env: &str) -> KvMap {
    kv! { url_key => env_or_empty(env), "timeout_secs" => 60, "retries" => 1, "backoff_ms" => 500 }
}

/// Writes lines to `path`, or to stdout when no path is given.
pub fn emit_lines(path: Option<&Path>, lines: &[String]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            dieta::data::write_lines(p, lines)
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for l in lines {
                writeln!(out, "{l}")?;
            }
            Ok(())
        }
    }
}
