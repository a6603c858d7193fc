//! Layered run configuration: built-in defaults (including environment
//! variables), then a `key=value` file, then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dieta::kv::KvMap;
use dieta::{Error, Result};

pub struct RunConfig {
    command: &'static str,
    kv: KvMap,
}

impl RunConfig {
    /// `defaults` names every key the command understands; an empty value
    /// means unset.
    pub fn resolve(command: &'static str, defaults: KvMap, file: Option<&Path>, flags: &KvMap) -> Result<Self> {
        let mut kv = defaults;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
            let parsed = KvMap::parse(&text)?;
            for (k, v) in parsed.iter() {
                if kv.raw(k).is_some() {
                    kv.set(k, v);
                } else {
                    log::debug!("config key {k} is not used by {command}");
                }
            }
        }
        kv.merge(flags);
        Ok(RunConfig { command, kv })
    }

    pub fn log(&self) {
        for (k, v) in self.kv.iter() {
            log::info!("config {}: {k}={v}", self.command);
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.kv.raw(key).filter(|v| !v.is_empty())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| missing(key))
    }

    /// Comma-separated list; empty when unset.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.str(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?.ok_or_else(|| missing(key))
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required setting {key} (flag --{})", key.replace('_', "-")))
}

/// Builds a [`KvMap`] from `key => value` pairs.
#[macro_export]
macro_rules! kv {
    ($($k:expr => $v:expr),* $(,)?) => {{
        #[allow(unused_mut)]
        let mut m = dieta::kv::KvMap::new();
        $(m.set($k, $v);)*
        m
    }};
}

/// Copies every `Some` flag into `kv` under the flag's field name.
#[macro_export]
macro_rules! flags {
    ($kv:expr, $args:expr; $($field:ident),* $(,)?) => {{
        $(if let Some(v) = &$args.$field {
            $kv.set(stringify!($field), $crate::config::FlagValue::flag(v));
        })*
    }};
}

pub fn join_paths(paths: &[PathBuf]) -> Option<String> {
    (!paths.is_empty()).then(|| {
        paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(",")
    })
}

pub fn env_or_empty(var: &str) -> String {
    std::env::var(var).unwrap_or_default()
}

/// Rendering of a flag value into the configuration map.
pub trait FlagValue {
    fn flag(&self) -> String;
}

impl FlagValue for PathBuf {
    fn flag(&self) -> String {
        self.display().to_string()
    }
}

macro_rules! display_flag {
    ($($t:ty),*) => {$(
        impl FlagValue for $t {
            fn flag(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_flag!(String, bool, u32, u64, usize);

impl FlagValue for f64 {
    fn flag(&self) -> String {
        format!("{self:?}")
    }
}
