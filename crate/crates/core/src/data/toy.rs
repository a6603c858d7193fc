//! Deterministic digit-spelling corpus for end-to-end experiments.

use std::collections::HashSet;

use super::{SentencePair, XorShift64Star};

pub const ITALIAN_DIGITS: [&str; 10] = [
    "zero", "uno", "due", "tre", "quattro", "cinque", "sei", "sette", "otto", "nove",
];

pub const TOY_TAG: &str = "toy";

/// Digits on the English side (`"4 7 1"`), spelled out on the Italian side
/// (`"quattro sette uno"`).
pub fn toy_pair(digits: &[u8]) -> SentencePair {
    let en: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
    let it: Vec<&str> = digits.iter().map(|&d| ITALIAN_DIGITS[d as usize]).collect();
    SentencePair::new(&en.join(" "), &it.join(" "), TOY_TAG).expect("single-line toy pair")
}

/// `train + held_out` distinct pairs with 1..=`max_len` digits; the first
/// `train` go to the training split.
pub fn toy_corpus(train: usize, held_out: usize, max_len: usize, seed: u64) -> (Vec<SentencePair>, Vec<SentencePair>) {
    let mut rng = XorShift64Star::new(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(train + held_out);
    let capacity: u64 = (1..=max_len as u32).map(|l| 10u64.saturating_pow(l)).sum();
    assert!(
        ((train + held_out) as u64) <= capacity,
        "cannot draw {} distinct strings of at most {max_len} digits",
        train + held_out
    );
    while out.len() < train + held_out {
        let len = 1 + (rng.next_u64() % max_len as u64) as usize;
        let digits: Vec<u8> = (0..len).map(|_| (rng.next_u64() % 10) as u8).collect();
        if seen.insert(digits.clone()) {
            out.push(toy_pair(&digits));
        }
    }
    let held = out.split_off(train);
    (out, held)
}
