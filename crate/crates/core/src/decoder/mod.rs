//! Greedy and beam-search decoding over any [`StepModel`], and the
//! tag-prompted translation protocol.

mod beam;
mod step;
mod translate;

#[cfg(test)]
mod tests;

pub use beam::{beam_search, beam_search_with, greedy_decode, greedy_decode_with, BeamHypothesis, DecodeParams};
pub use step::{log_softmax, FnStepModel, StepModel};
pub use translate::{build_prompt, translate, translate_lines, ModelTranslator};
