use super::{ordered_map, Direction, RetryPolicy, SentencePair, Translator, SYNTHETIC_TAG};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MtFailure {
    pub position: usize,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct BacktranslateOutcome {
    pub pairs: Vec<SentencePair>,
    pub failures: Vec<MtFailure>,
    /// Blank input lines, skipped without a request.
    pub blank: usize,
}

/// Turns monolingual text in `direction.source()` into synthetic pairs whose
/// machine-translated side is the training source. Failed lines are skipped
/// and recorded.
pub fn backtranslate<S: AsRef<str> + Sync>(
    lines: &[S],
    mt: &(dyn Translator + Sync),
    direction: Direction,
    policy: &RetryPolicy,
    workers: usize,
) -> BacktranslateOutcome {
    let human = direction.source();
    let results: Vec<Option<Result<SentencePair>>> = ordered_map(lines, workers, |_, line| {
        let gold = line.as_ref().trim_end_matches(['\n', '\r']);
        if gold.trim().is_empty() {
            return None;
        }
        Some(policy.run(|| mt.translate(gold, direction)).and_then(|synthetic| {
            let (en, it) = match direction {
                Direction::ItEn => (synthetic.as_str(), gold),
                Direction::EnIt => (gold, synthetic.as_str()),
            };
            let mut pair = SentencePair::new(en, it, SYNTHETIC_TAG)?;
            pair.synthetic_side = Some(direction.target());
            Ok(pair)
        }))
    });
    let mut out = BacktranslateOutcome::default();
    for (position, r) in results.into_iter().enumerate() {
        match r {
            None => out.blank += 1,
            Some(Ok(p)) => out.pairs.push(p),
            Some(Err(e)) => {
                log::warn!("back-translation skipped line {position}: {e}");
                out.failures.push(MtFailure {
                    position,
                    error: e.to_string(),
                })
            }
        }
    }
    debug_assert!(out.pairs.iter().all(|p| p.synthetic_side != Some(human)));
    out
}
