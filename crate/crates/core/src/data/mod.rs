//! Corpus preparation: dedup, judge filtering, direction templates,
//! reproducible shuffling and back-translation.

mod backtranslate;
mod clients;
mod corpus;
mod dedup;
mod filter;
mod pair;
mod pool;
mod shuffle;
pub mod toy;

#[cfg(test)]
mod tests;

pub use backtranslate::{backtranslate, BacktranslateOutcome, MtFailure};
pub use clients::{HttpJudge, HttpTranslator, Judge, RetryPolicy, Stub, Translator, JUDGE_URL_ENV, MT_URL_ENV};
pub(crate) use clients::{agent, post};
pub use corpus::{read_aligned, read_lines, read_tsv, write_lines, write_pairs_tsv, write_rejections, ReadStats};
pub use dedup::{dedup, Dedup};
pub use filter::{build_filter_prompt, llm_filter, parse_reply, FilterOutcome, JudgeVerdict, RejectReason, Rejection, FILTER_INSTRUCTION};
pub use pair::{format_bidirectional, format_pair, format_sample, Direction, FormattedSample, Lang, SentencePair, SYNTHETIC_TAG};
pub use pool::ordered_map;
pub use shuffle::{permutation, shuffle, shuffle_file, XorShift64Star};

use crate::Result;

/// Counters reported by [`prepare`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareStats {
    pub input_pairs: usize,
    pub duplicates: usize,
    pub rejected_no: usize,
    pub rejected_malformed: usize,
    pub kept_pairs: usize,
    pub output_samples: usize,
}

impl PrepareStats {
    pub fn to_tsv(&self) -> String {
        format!(
            "input_pairs\t{}\nduplicates_removed\t{}\nrejected_no\t{}\nrejected_malformed\t{}\nkept_pairs\t{}\noutput_samples\t{}\n",
            self.input_pairs,
            self.duplicates,
            self.rejected_no,
            self.rejected_malformed,
            self.kept_pairs,
            self.output_samples
        )
    }
}

pub struct Prepared {
    pub samples: Vec<FormattedSample>,
    pub rejections: Vec<Rejection>,
    pub stats: PrepareStats,
}

/// dedup, then the optional judge, then templating, then a seeded shuffle.
/// Synthetic pairs yield a single sample; human pairs yield both directions.
pub fn prepare(
    pairs: Vec<SentencePair>,
    judge: Option<&(dyn Judge + Sync)>,
    policy: &RetryPolicy,
    workers: usize,
    seed: u64,
) -> Result<Prepared> {
    let input_pairs = pairs.len();
    let (unique, duplicates) = dedup(pairs);
    let (kept, rejections) = match judge {
        Some(j) => {
            let out = llm_filter(unique, j, policy, workers)?;
            (out.kept, out.rejections)
        }
        None => (unique, Vec::new()),
    };
    let mut samples: Vec<FormattedSample> = kept.iter().flat_map(format_pair).collect();
    shuffle(&mut samples, seed);
    let count = |r: RejectReason| rejections.iter().filter(|x| x.reason == r).count();
    let stats = PrepareStats {
        input_pairs,
        duplicates,
        rejected_no: count(RejectReason::No),
        rejected_malformed: count(RejectReason::Malformed),
        kept_pairs: kept.len(),
        output_samples: samples.len(),
    };
    Ok(Prepared {
        samples,
        rejections,
        stats,
    })
}
