use std::collections::HashMap;

use super::{check_lengths, is_py_space, normalize};
use crate::Result;

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

/// Summed `(hyp, ref, match)` n-gram counts for n = 1..=6.
#[derive(Debug, Clone, PartialEq)]
pub struct ChrfScore {
    pub score: f64,
    pub stats: [[u64; 3]; CHRF_ORDER],
}

impl ChrfScore {
    pub const SIGNATURE: &'static str = "nrefs:1|case:mixed|eff:yes|nc:6|nw:0|space:no";
}

fn char_ngrams(line: &str) -> Vec<HashMap<String, u64>> {
    let chars: Vec<char> = normalize(line).chars().filter(|c| !is_py_space(*c)).collect();
    (1..=CHRF_ORDER)
        .map(|n| {
            let mut m = HashMap::new();
            for w in chars.windows(n) {
                *m.entry(w.iter().collect()).or_default() += 1;
            }
            m
        })
        .collect()
}

/// Per-segment statistics; hypothesis counts are zeroed for orders where
/// the reference has no n-grams.
pub fn chrf_stats(hyp: &str, reference: &str) -> [[u64; 3]; CHRF_ORDER] {
    let h = char_ngrams(hyp);
    let r = char_ngrams(reference);
    let mut out = [[0u64; 3]; CHRF_ORDER];
    for n in 0..CHRF_ORDER {
        let mut matched = 0;
        let mut hyp_count = 0;
        for (g, &c) in &h[n] {
            hyp_count += c;
            if let Some(&rc) = r[n].get(g) {
                matched += c.min(rc);
            }
        }
        let ref_count: u64 = r[n].values().sum();
        out[n] = [if r[n].is_empty() { 0 } else { hyp_count }, ref_count, matched];
    }
    out
}

fn f_score(stats: &[[u64; 3]; CHRF_ORDER]) -> f64 {
    let factor = CHRF_BETA * CHRF_BETA;
    let (mut p, mut r, mut eff) = (0.0, 0.0, 0usize);
    for &[nh, nr, nm] in stats {
        if nh > 0 && nr > 0 {
            p += nm as f64 / nh as f64;
            r += nm as f64 / nr as f64;
            eff += 1;
        }
    }
    if eff == 0 {
        return 0.0;
    }
    let (p, r) = (p / eff as f64, r / eff as f64);
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * (1.0 + factor) * p * r / (factor * p + r)
    }
}

pub fn chrf<S: AsRef<str>, T: AsRef<str>>(hyps: &[S], refs: &[T]) -> Result<ChrfScore> {
    check_lengths(hyps.len(), refs.len())?;
    let mut stats = [[0u64; 3]; CHRF_ORDER];
    for (h, r) in hyps.iter().zip(refs) {
        for (acc, s) in stats.iter_mut().zip(chrf_stats(h.as_ref(), r.as_ref())) {
            for k in 0..3 {
                acc[k] += s[k];
            }
        }
    }
    Ok(ChrfScore {
        score: f_score(&stats),
        stats,
    })
}
