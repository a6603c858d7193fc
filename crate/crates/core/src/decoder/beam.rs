use std::cmp::Ordering;

use super::step::{log_softmax, StepModel};
use crate::tokenizer::EOS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeParams {
    pub max_new_tokens: usize,
    /// 1 selects greedy decoding.
    pub beam_width: usize,
    /// Exponent α in `logprob / len^α`.
    pub length_penalty: f64,
    pub eos: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            max_new_tokens: 128,
            beam_width: 1,
            length_penalty: 0.6,
            eos: EOS,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.max_new_tokens == 0 {
            return Err(Error::Config("beam_width and max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }

    fn normalized(&self, logprob: f64, len: usize) -> f64 {
        if self.length_penalty == 0.0 {
            logprob
        } else {
            logprob / (len.max(1) as f64).powf(self.length_penalty)
        }
    }
}

/// Generated tokens (prompt excluded) with their summed log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub tokens: Vec<u32>,
    pub logprob: f64,
    pub finished: bool,
}

impl BeamHypothesis {
    pub fn score(&self, params: &DecodeParams) -> f64 {
        params.normalized(self.logprob, self.tokens.len())
    }
}

fn check_prompt<M: StepModel>(model: &M, prompt: &[u32]) -> Result<()> {
    if prompt.is_empty() {
        return Err(Error::Contract("prompt must not be empty".into()));
    }
    if prompt.len() > model.max_len() {
        return Err(Error::Length {
            len: prompt.len(),
            max: model.max_len(),
        });
    }
    Ok(())
}

/// Highest value, lowest index on ties.
fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as u32
}

pub fn greedy_decode<M: StepModel>(model: &M, prompt: &[u32], params: &DecodeParams) -> Result<BeamHypothesis> {
    greedy_decode_with(model, prompt, params, &|_| false)
}

/// Greedy decoding that also halts once `stop(generated)` holds.
pub fn greedy_decode_with<M: StepModel>(
    model: &M,
    prompt: &[u32],
    params: &DecodeParams,
    stop: &dyn Fn(&[u32]) -> bool,
) -> Result<BeamHypothesis> {
    params.validate()?;
    check_prompt(model, prompt)?;
    let (mut state, mut logits) = model.start(prompt)?;
    let mut hyp = BeamHypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        finished: false,
    };
    loop {
        let lp = log_softmax(&logits);
        let tok = argmax(&lp);
        hyp.tokens.push(tok);
        hyp.logprob += lp[tok as usize];
        if tok == params.eos || stop(&hyp.tokens) {
            hyp.finished = true;
            break;
        }
        if hyp.tokens.len() >= params.max_new_tokens || prompt.len() + hyp.tokens.len() >= model.max_len() {
            break;
        }
        logits = model.step(&mut state, tok)?;
    }
    Ok(hyp)
}

struct Live<S> {
    hyp: BeamHypothesis,
    state: S,
    logprobs: Vec<f64>,
}

/// Indices of the `k` largest entries, ties to the lower index.
fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn beam_search<M: StepModel>(model: &M, prompt: &[u32], params: &DecodeParams) -> Result<BeamHypothesis> {
    beam_search_with(model, prompt, params, &|_| false)
}

/// Length-normalised beam search. Each live beam proposes its top
/// `beam_width` tokens; the best `beam_width` proposals survive, those ending
/// in EOS (or satisfying `stop`) moving to the finished pool. Search ends
/// when nothing is live, the budget is spent, or no live beam can overtake
/// the best finished one (only checked when α = 0, where scores never rise).
/// The result is the best hypothesis overall, finished or cut by the budget.
pub fn beam_search_with<M: StepModel>(
    model: &M,
    prompt: &[u32],
    params: &DecodeParams,
    stop: &dyn Fn(&[u32]) -> bool,
) -> Result<BeamHypothesis> {
    params.validate()?;
    check_prompt(model, prompt)?;
    let width = params.beam_width;
    let (state, logits) = model.start(prompt)?;
    let mut live = vec![Live {
        hyp: BeamHypothesis {
            tokens: Vec::new(),
            logprob: 0.0,
            finished: false,
        },
        state,
        logprobs: log_softmax(&logits),
    }];
    let mut finished: Vec<BeamHypothesis> = Vec::new();
    let better = |a: &BeamHypothesis, b: &BeamHypothesis| {
        a.score(params)
            .partial_cmp(&b.score(params))
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.tokens.cmp(&a.tokens))
    };

    for _ in 0..params.max_new_tokens {
        let mut cands: Vec<(usize, u32, BeamHypothesis)> = Vec::new();
        for (b, l) in live.iter().enumerate() {
            for t in top_k(&l.logprobs, width) {
                let mut tokens = l.hyp.tokens.clone();
                tokens.push(t as u32);
                let hyp = BeamHypothesis {
                    logprob: l.hyp.logprob + l.logprobs[t],
                    finished: t as u32 == params.eos || stop(&tokens),
                    tokens,
                };
                cands.push((b, t as u32, hyp));
            }
        }
        cands.sort_by(|x, y| better(&y.2, &x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
        cands.truncate(width);

        let at_limit = prompt.len() + live[0].hyp.tokens.len() + 1 >= model.max_len();
        let mut next = Vec::new();
        for (b, t, hyp) in cands {
            if hyp.finished {
                finished.push(hyp);
            } else if at_limit {
                finished.push(BeamHypothesis { finished: false, ..hyp });
            } else {
                let mut state = live[b].state.clone();
                let logits = model.step(&mut state, t)?;
                next.push(Live {
                    hyp,
                    state,
                    logprobs: log_softmax(&logits),
                });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
        if params.length_penalty == 0.0 {
            let best_done = finished.iter().filter(|h| h.finished).map(|h| h.logprob).fold(f64::NEG_INFINITY, f64::max);
            let best_live = live.iter().map(|l| l.hyp.logprob).fold(f64::NEG_INFINITY, f64::max);
            if best_done >= best_live {
                break;
            }
        }
    }

    // Finished and budget-cut hypotheses compete on equal terms.
    finished
        .into_iter()
        .chain(live.into_iter().map(|l| l.hyp))
        .max_by(|a, b| better(a, b))
        .ok_or_else(|| Error::Contract("beam search produced no hypothesis".into()))
}
