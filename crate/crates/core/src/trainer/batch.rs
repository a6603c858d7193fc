use crate::model::Geometry;
use crate::tokenizer::{Vocab, EOS, PAD};
use crate::{Error, Result};

/// A padded `[rows × width]` token grid. Inputs are columns `0..width-1`,
/// targets columns `1..width`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub rows: usize,
    pub width: usize,
    pub tokens: Vec<u32>,
}

impl Batch {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            batch: self.rows,
            seq: self.width - 1,
        }
    }

    pub fn inputs(&self) -> Vec<u32> {
        self.tokens
            .chunks(self.width)
            .flat_map(|r| r[..self.width - 1].iter().copied())
            .collect()
    }

    pub fn targets(&self) -> Vec<u32> {
        self.tokens.chunks(self.width).flat_map(|r| r[1..].iter().copied()).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.targets().iter().map(|&t| t != PAD).collect()
    }

    /// Non-padding tokens in the grid.
    pub fn real_tokens(&self) -> usize {
        self.tokens.iter().filter(|&&t| t != PAD).count()
    }

    /// Positions that contribute to the loss.
    pub fn target_tokens(&self) -> usize {
        self.mask().iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchStats {
    pub samples: usize,
    pub tokens: usize,
    pub truncated: usize,
    /// Samples too short to train on (a single token after encoding).
    pub dropped: usize,
}

/// Encodes `text`, appends EOS and truncates to `max_len`.
pub fn encode_sample(vocab: &Vocab, text: &str, max_len: usize) -> (Vec<u32>, bool) {
    let mut ids = vocab.encode(text);
    ids.push(EOS);
    let truncated = ids.len() > max_len;
    ids.truncate(max_len);
    (ids, truncated)
}

/// Packs sequences in order into grids whose padded size stays within
/// `max_tokens`.
pub fn pack(seqs: Vec<Vec<u32>>, max_tokens: usize) -> Vec<Batch> {
    let mut batches = Vec::new();
    let mut current: Vec<Vec<u32>> = Vec::new();
    let mut width = 0;
    let flush = |current: &mut Vec<Vec<u32>>, width: usize, out: &mut Vec<Batch>| {
        if current.is_empty() {
            return;
        }
        let mut tokens = Vec::with_capacity(current.len() * width);
        for s in current.drain(..) {
            let pad = width - s.len();
            tokens.extend(s);
            tokens.extend(std::iter::repeat_n(PAD, pad));
        }
        out.push(Batch {
            rows: tokens.len() / width,
            width,
            tokens,
        });
    };
    for s in seqs {
        let w = width.max(s.len());
        if !current.is_empty() && (current.len() + 1) * w > max_tokens {
            flush(&mut current, width, &mut batches);
            width = 0;
        }
        width = width.max(s.len());
        current.push(s);
    }
    flush(&mut current, width, &mut batches);
    batches
}

pub fn make_batches<S: AsRef<str>>(
    samples: &[S],
    vocab: &Vocab,
    max_tokens_per_batch: usize,
    max_seq_len: usize,
) -> Result<(Vec<Batch>, BatchStats)> {
    if max_seq_len < 2 {
        return Err(Error::Config("max_seq_len must be at least 2".into()));
    }
    if max_tokens_per_batch < max_seq_len {
        return Err(Error::Config(format!(
            "max_tokens_per_batch {max_tokens_per_batch} is below max_seq_len {max_seq_len}"
        )));
    }
    let mut stats = BatchStats::default();
    let mut seqs = Vec::with_capacity(samples.len());
    for s in samples {
        let (ids, truncated) = encode_sample(vocab, s.as_ref(), max_seq_len);
        stats.truncated += truncated as usize;
        if ids.len() < 2 {
            stats.dropped += 1;
            continue;
        }
        stats.samples += 1;
        stats.tokens += ids.len();
        seqs.push(ids);
    }
    Ok((pack(seqs, max_tokens_per_batch), stats))
}
