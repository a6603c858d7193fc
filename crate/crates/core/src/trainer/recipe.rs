use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const PARALLEL_SAMPLES: u64 = 415_728_874;
pub const NEWSCRAWL_SAMPLES: u64 = 144_195_695;
pub const FINEWEB_SAMPLES: u64 = 208_516_318;

/// A training data component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    /// Human parallel pairs in both directions.
    Parallel,
    /// Back-translated news.
    NewsCrawl,
    /// Back-translated web text.
    FineWeb,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Parallel => "parallel",
            Source::NewsCrawl => "newscrawl",
            Source::FineWeb => "fineweb",
        }
    }

    pub fn paper_samples(self) -> u64 {
        match self {
            Source::Parallel => PARALLEL_SAMPLES,
            Source::NewsCrawl => NEWSCRAWL_SAMPLES,
            Source::FineWeb => FINEWEB_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecipeName {
    Dieta,
    Bt,
    Cont,
    NoSynth,
    AllSynth,
}

impl RecipeName {
    pub const ALL: [RecipeName; 5] = [
        RecipeName::Dieta,
        RecipeName::Bt,
        RecipeName::Cont,
        RecipeName::NoSynth,
        RecipeName::AllSynth,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RecipeName::Dieta => "DIETA",
            RecipeName::Bt => "+BT",
            RecipeName::Cont => "+cont",
            RecipeName::NoSynth => "+nosynth",
            RecipeName::AllSynth => "+allsynth",
        }
    }
}

impl fmt::Display for RecipeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RecipeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches("DIETA").trim_start_matches('_').to_ascii_lowercase();
        match key.trim_start_matches('+') {
            "" | "dieta" | "base" => Ok(RecipeName::Dieta),
            "bt" => Ok(RecipeName::Bt),
            "cont" => Ok(RecipeName::Cont),
            "nosynth" => Ok(RecipeName::NoSynth),
            "allsynth" => Ok(RecipeName::AllSynth),
            _ => Err(Error::Config(format!(
                "unknown recipe {s:?} (expected DIETA, +BT, +cont, +nosynth or +allsynth)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainRecipe {
    pub name: RecipeName,
    pub mixture: Vec<Source>,
    /// Recipe whose final checkpoint this one starts from.
    pub start_from: Option<RecipeName>,
    /// Epochs run by this recipe.
    pub epochs: u32,
    /// Cumulative epochs seen by the finished checkpoint.
    pub epoch_index: u32,
}

impl TrainRecipe {
    pub fn preset(name: RecipeName) -> Self {
        use Source::*;
        let (mixture, start_from, epoch_index) = match name {
            RecipeName::Dieta => (vec![Parallel], None, 1),
            RecipeName::Bt => (vec![Parallel, NewsCrawl], None, 1),
            RecipeName::Cont => (vec![Parallel, NewsCrawl], Some(RecipeName::Dieta), 2),
            RecipeName::NoSynth => (vec![Parallel], Some(RecipeName::Dieta), 2),
            RecipeName::AllSynth => (vec![Parallel, NewsCrawl, FineWeb], Some(RecipeName::Cont), 3),
        };
        TrainRecipe {
            name,
            mixture,
            start_from,
            epochs: 1,
            epoch_index,
        }
    }

    /// Samples per epoch at full scale.
    pub fn paper_samples(&self) -> u64 {
        self.mixture.iter().map(|s| s.paper_samples()).sum()
    }

    pub fn requires_checkpoint(&self) -> bool {
        self.start_from.is_some()
    }
}
