//! Corpus BLEU and chrF computed the way sacreBLEU computes them, a client
//! for external neural scorers, and leaderboard rendering.

mod bleu;
mod chrf;
mod evalset;
mod external;
mod report;

#[cfg(test)]
mod tests;

pub use bleu::{bleu, bleu_with, tokenize_intl, BleuConfig, BleuScore, Smoothing};
pub use chrf::{chrf, chrf_stats, ChrfScore, CHRF_BETA, CHRF_ORDER};
pub use evalset::EvalSet;
pub use external::{score_external, ExternalScore, HttpScorer, Scorer, StubScorer, SCORER_URL_ENV};
pub use report::{polarity, render_report, MetricReport, MetricValue, Polarity, Table, BEAM_SUFFIX};

use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// Canonical composition applied to every segment before scoring.
pub(crate) fn normalize(line: &str) -> String {
    line.nfc().collect()
}

/// Python's `str.split()` whitespace, which also covers U+001C..U+001F.
pub(crate) fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

pub(crate) fn check_lengths(hyps: usize, refs: usize) -> Result<()> {
    if hyps != refs {
        return Err(Error::Contract(format!(
            "{hyps} hypotheses but {refs} references"
        )));
    }
    if hyps == 0 {
        return Err(Error::Contract("cannot score an empty corpus".into()));
    }
    Ok(())
}
