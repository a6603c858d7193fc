use std::collections::HashSet;

use super::SentencePair;

/// Streaming exact-duplicate detector keyed on `(english, italian)` bytes.
#[derive(Debug, Default)]
pub struct Dedup {
    seen: HashSet<(String, String)>,
    duplicates: usize,
}

impl Dedup {
    pub fn new() -> Self {
        Self::default()
    }

    /// True the first time a pair is seen.
    pub fn admit(&mut self, pair: &SentencePair) -> bool {
        let fresh = self.seen.insert((pair.english.clone(), pair.italian.clone()));
        if !fresh {
            self.duplicates += 1;
        }
        fresh
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }
}

/// Keeps first occurrences in order; returns the survivors and the drop count.
pub fn dedup(pairs: Vec<SentencePair>) -> (Vec<SentencePair>, usize) {
    let mut d = Dedup::new();
    let kept: Vec<SentencePair> = pairs.into_iter().filter(|p| d.admit(p)).collect();
    (kept, d.duplicates())
}
