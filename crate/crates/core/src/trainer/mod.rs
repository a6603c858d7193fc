//! Lion optimisation, the learning-rate schedule, token-budget batching and
//! the five recipe presets.

mod batch;
mod lion;
mod recipe;
mod schedule;
mod train;

#[cfg(test)]
mod tests;

pub use batch::{encode_sample, make_batches, pack, Batch, BatchStats};
pub use lion::{lion_step, LionConfig, LionState, LION_MAGIC};
pub use recipe::{RecipeName, Source, TrainRecipe, FINEWEB_SAMPLES, NEWSCRAWL_SAMPLES, PARALLEL_SAMPLES};
pub use schedule::{Schedule, PAPER_PEAK_LR, PAPER_WARMUP_FRACTION};
pub use train::{load_start_checkpoint, train, StepReport, TrainOptions, TrainSummary, Trainer};
