use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{check_lengths, is_py_space, normalize};
use crate::Result;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Halve the pseudo-count for each successive order without matches.
    Exp,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub smoothing: Smoothing,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            smoothing: Smoothing::Exp,
            lowercase: false,
        }
    }
}

impl BleuConfig {
    pub fn signature(&self) -> String {
        format!(
            "nrefs:1|case:{}|eff:no|tok:intl|smooth:{}",
            if self.lowercase { "lc" } else { "mixed" },
            match self.smoothing {
                Smoothing::Exp => "exp",
                Smoothing::None => "none",
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    pub counts: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub precisions: [f64; MAX_ORDER],
    pub bp: f64,
    pub sys_len: u64,
    pub ref_len: u64,
}

fn rules() -> &'static [(Regex, &'static str); 3] {
    static RULES: OnceLock<[(Regex, &'static str); 3]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (Regex::new(r"(\P{N})(\p{P})").expect("valid regex"), "$1 $2 "),
            (Regex::new(r"(\p{P})(\P{N})").expect("valid regex"), " $1 $2"),
            (Regex::new(r"(\p{S})").expect("valid regex"), " $1 "),
        ]
    })
}

/// International tokenization: punctuation is separated from any
/// neighbouring non-digit, symbols are always separated, and runs of
/// whitespace collapse to one space.
pub fn tokenize_intl(line: &str) -> String {
    let mut s = line.to_string();
    for (re, rep) in rules() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s.split(is_py_space).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ")
}

fn ngrams(tokens: &[&str]) -> HashMap<Vec<String>, u64> {
    let mut out = HashMap::new();
    for n in 1..=MAX_ORDER {
        for w in tokens.windows(n) {
            *out.entry(w.iter().map(|s| s.to_string()).collect()).or_default() += 1;
        }
    }
    out
}

fn my_log(x: f64) -> f64 {
    if x == 0.0 {
        -9_999_999_999.0
    } else {
        x.ln()
    }
}

pub fn bleu<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<BleuScore> {
    bleu_with(hyps, refs, &BleuConfig::default())
}

pub fn bleu_with<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T], cfg: &BleuConfig) -> Result<BleuScore> {
    check_lengths(hyps.len(), refs.len())?;
    let prep = |s: &str| {
        let s = normalize(s);
        let s = s.trim_end_matches(is_py_space);
        let s = if cfg.lowercase { s.to_lowercase() } else { s.to_string() };
        tokenize_intl(&s)
    };
    let mut counts = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut sys_len, mut ref_len) = (0u64, 0u64);
    for (h, r) in hyps.iter().zip(refs) {
        let (h, r) = (prep(h.as_ref()), prep(r.as_ref()));
        let ht: Vec<&str> = h.split(' ').filter(|t| !t.is_empty()).collect();
        let rt: Vec<&str> = r.split(' ').filter(|t| !t.is_empty()).collect();
        sys_len += ht.len() as u64;
        ref_len += rt.len() as u64;
        let rg = ngrams(&rt);
        for (g, c) in ngrams(&ht) {
            let n = g.len() - 1;
            totals[n] += c;
            counts[n] += c.min(rg.get(&g).copied().unwrap_or(0));
        }
    }
    Ok(score_from_stats(counts, totals, sys_len, ref_len, cfg.smoothing))
}

fn score_from_stats(
    counts: [u64; MAX_ORDER],
    totals: [u64; MAX_ORDER],
    sys_len: u64,
    ref_len: u64,
    smoothing: Smoothing,
) -> BleuScore {
    let bp = if sys_len < ref_len {
        if sys_len > 0 {
            (1.0 - ref_len as f64 / sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut precisions = [0.0; MAX_ORDER];
    let mut result = BleuScore {
        score: 0.0,
        counts,
        totals,
        precisions,
        bp,
        sys_len,
        ref_len,
    };
    if counts.iter().all(|&c| c == 0) {
        return result;
    }
    let mut smooth = 1.0;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            break;
        }
        precisions[n] = if counts[n] == 0 {
            match smoothing {
                Smoothing::Exp => {
                    smooth *= 2.0;
                    100.0 / (smooth * totals[n] as f64)
                }
                Smoothing::None => 0.0,
            }
        } else {
            100.0 * counts[n] as f64 / totals[n] as f64
        };
    }
    let mean = precisions.iter().map(|&p| my_log(p)).sum::<f64>() / MAX_ORDER as f64;
    result.precisions = precisions;
    result.score = bp * mean.exp();
    result
}
