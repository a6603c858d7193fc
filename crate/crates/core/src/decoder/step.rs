use crate::model::{DietaModel, KvCache};
use crate::real::Real;
use crate::{Error, Result};

/// Incremental next-token scorer.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// Longest sequence the model can consume.
    fn max_len(&self) -> usize;

    /// Consumes the prompt; returns the state and next-token logits.
    fn start(&self, prompt: &[u32]) -> Result<(Self::State, Vec<f64>)>;

    /// Feeds one more token; returns the following next-token logits.
    fn step(&self, state: &mut Self::State, token: u32) -> Result<Vec<f64>>;
}

impl<F: Real> StepModel for DietaModel<F> {
    type State = KvCache<F>;

    fn vocab_size(&self) -> usize {
        self.config().vocab_size
    }

    fn max_len(&self) -> usize {
        self.config().max_seq_len
    }

    fn start(&self, prompt: &[u32]) -> Result<(KvCache<F>, Vec<f64>)> {
        let mut cache = self.new_cache();
        let logits = self.extend_last(&mut cache, prompt)?;
        Ok((cache, logits.iter().map(|v| v.as_f64()).collect()))
    }

    fn step(&self, cache: &mut KvCache<F>, token: u32) -> Result<Vec<f64>> {
        let logits = self.extend_last(cache, &[token])?;
        Ok(logits.iter().map(|v| v.as_f64()).collect())
    }
}

/// A model defined by a function from the full token history to logits.
pub struct FnStepModel<L> {
    pub vocab: usize,
    pub max_len: usize,
    pub logits: L,
}

impl<L: Fn(&[u32]) -> Vec<f64>> StepModel for FnStepModel<L> {
    type State = Vec<u32>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn start(&self, prompt: &[u32]) -> Result<(Vec<u32>, Vec<f64>)> {
        if prompt.len() > self.max_len {
            return Err(Error::Length {
                len: prompt.len(),
                max: self.max_len,
            });
        }
        Ok((prompt.to_vec(), (self.logits)(prompt)))
    }

    fn step(&self, history: &mut Vec<u32>, token: u32) -> Result<Vec<f64>> {
        if history.len() >= self.max_len {
            return Err(Error::Length {
                len: history.len() + 1,
                max: self.max_len,
            });
        }
        history.push(token);
        Ok((self.logits)(history))
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}
