use super::beam::{beam_search_with, greedy_decode_with, DecodeParams};
use super::step::StepModel;
use crate::data::{ordered_map, Direction, Lang, Translator};
use crate::tokenizer::Vocab;
use crate::Result;

/// `"ENG: {text} IT:"` for en→it, mirrored for it→en.
pub fn build_prompt(text: &str, direction: Direction) -> String {
    format!("{} {} {}", direction.source().tag(), text, direction.target().tag())
}

fn first_tag(text: &str) -> Option<usize> {
    [Lang::English.tag(), Lang::Italian.tag()]
        .iter()
        .filter_map(|t| text.find(t))
        .min()
}

/// Translates one sentence. Generation ends at EOS or as soon as a language
/// tag appears in the output; the tag and anything after it are dropped.
pub fn translate<M: StepModel>(
    model: &M,
    vocab: &Vocab,
    text: &str,
    direction: Direction,
    params: &DecodeParams,
) -> Result<String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(String::new());
    }
    let prompt = vocab.encode(&build_prompt(text, direction));
    let stop = |ids: &[u32]| vocab.decode(ids).map(|s| first_tag(&s).is_some()).unwrap_or(false);
    let hyp = if params.beam_width <= 1 {
        greedy_decode_with(model, &prompt, params, &stop)?
    } else {
        beam_search_with(model, &prompt, params, &stop)?
    };
    let out = vocab.decode(&hyp.tokens)?;
    let cut = first_tag(&out).unwrap_or(out.len());
    Ok(out[..cut].trim().to_string())
}

/// Order-preserving batch translation over up to `workers` threads.
pub fn translate_lines<M, S>(
    model: &M,
    vocab: &Vocab,
    lines: &[S],
    direction: Direction,
    params: &DecodeParams,
    workers: usize,
) -> Result<Vec<String>>
where
    M: StepModel + Sync,
    S: AsRef<str> + Sync,
{
    ordered_map(lines, workers, |_, l| translate(model, vocab, l.as_ref(), direction, params))
        .into_iter()
        .collect()
}

/// Adapts a local model to the back-translation client interface.
pub struct ModelTranslator<'a, M> {
    pub model: &'a M,
    pub vocab: &'a Vocab,
    pub params: DecodeParams,
}

impl<M: StepModel + Sync> Translator for ModelTranslator<'_, M> {
    fn translate(&self, text: &str, direction: Direction) -> Result<String> {
        translate(self.model, self.vocab, text, direction, &self.params)
    }
}
