use super::{ordered_map, Judge, RetryPolicy, SentencePair};
use crate::{Error, Result};

pub const FILTER_INSTRUCTION: &str =
    "Given the English and Italian sentences below, are they translations of each other? Answer with yes or no only.";

pub fn build_filter_prompt(pair: &SentencePair) -> String {
    format!("{FILTER_INSTRUCTION}\nEnglish: {}\nItalian: {}", pair.english, pair.italian)
}

/// `Some(true)` for yes, `Some(false)` for no, `None` for anything else.
/// Case and punctuation are ignored; only the first word counts.
pub fn parse_reply(raw: &str) -> Option<bool> {
    let cleaned: String = raw
        .chars()
        .filter(|c| !(c.is_ascii_punctuation() || is_unicode_punct(*c)))
        .flat_map(char::to_lowercase)
        .collect();
    match cleaned.split_whitespace().next() {
        Some("yes") => Some(true),
        Some("no") => Some(false),
        _ => None,
    }
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '¡' | '¿' | '«' | '»' | '“' | '”' | '‘' | '’' | '…' | '–' | '—')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub keep: bool,
    pub raw_reply: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    No,
    Malformed,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::No => "no",
            RejectReason::Malformed => "malformed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Zero-based index within the filter input.
    pub position: usize,
    pub pair: SentencePair,
    pub reason: RejectReason,
    pub raw_reply: String,
}

#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub kept: Vec<SentencePair>,
    pub rejections: Vec<Rejection>,
}

enum Judged {
    Keep,
    Reject(RejectReason, String),
}

fn judge_one(judge: &(dyn Judge + Sync), pair: &SentencePair, policy: &RetryPolicy) -> Result<Judged> {
    let prompt = build_filter_prompt(pair);
    let mut attempt = 0;
    loop {
        policy.wait(attempt);
        let reply = match judge.ask(&prompt) {
            Ok(r) => r,
            Err(e) if attempt >= policy.retries => return Err(e),
            Err(_) => {
                attempt += 1;
                continue;
            }
        };
        match parse_reply(&reply) {
            Some(true) => return Ok(Judged::Keep),
            Some(false) => return Ok(Judged::Reject(RejectReason::No, reply)),
            None if attempt >= policy.retries => return Ok(Judged::Reject(RejectReason::Malformed, reply)),
            None => attempt += 1,
        }
    }
}

/// Asks the judge about every pair, keeping input order. A judge that stays
/// unreachable after the retries aborts the run with the pair position.
pub fn llm_filter(
    pairs: Vec<SentencePair>,
    judge: &(dyn Judge + Sync),
    policy: &RetryPolicy,
    workers: usize,
) -> Result<FilterOutcome> {
    let results = ordered_map(&pairs, workers, |_, p| judge_one(judge, p, policy));
    let mut out = FilterOutcome::default();
    for (position, (pair, r)) in pairs.into_iter().zip(results).enumerate() {
        match r.map_err(|e| Error::Client(format!("judge failed on pair {position}: {e}")))? {
            Judged::Keep => out.kept.push(pair),
            Judged::Reject(reason, raw_reply) => out.rejections.push(Rejection {
                position,
                pair,
                reason,
                raw_reply,
            }),
        }
    }
    Ok(out)
}
