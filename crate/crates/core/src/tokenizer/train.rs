use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use super::{apply_merge, pretokenize, Vocab, NUM_SPECIALS};
use crate::{Error, Result};

type Pair = (u32, u32);

/// Learns merges greedily by pair frequency until `vocab_size` pieces exist
/// or no pair occurs twice. Ties go to the lexicographically smallest
/// `(left bytes, right bytes)`.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], vocab_size: usize, byte_fallback: bool) -> Result<Vocab> {
    let mut types: BTreeMap<&str, u64> = BTreeMap::new();
    for line in corpus {
        for chunk in pretokenize(line.as_ref()) {
            *types.entry(chunk).or_default() += 1;
        }
    }
    if types.is_empty() {
        return Err(Error::Input("cannot train a tokenizer on an empty corpus".into()));
    }
    let alphabet: Vec<u8> = if byte_fallback {
        (0..=255).collect()
    } else {
        let seen: BTreeSet<u8> = types.keys().flat_map(|t| t.bytes()).collect();
        seen.into_iter().collect()
    };
    let base = NUM_SPECIALS + alphabet.len();
    if vocab_size < base {
        return Err(Error::Config(format!(
            "vocab_size {vocab_size} is smaller than the {base} specials and byte pieces"
        )));
    }

    let mut pieces: Vec<Vec<u8>> = vec![Vec::new(); NUM_SPECIALS];
    let mut byte_id = [0u32; 256];
    for &b in &alphabet {
        byte_id[b as usize] = pieces.len() as u32;
        pieces.push(vec![b]);
    }
    let mut words: Vec<Vec<u32>> = Vec::with_capacity(types.len());
    let mut freq: Vec<u64> = Vec::with_capacity(types.len());
    for (t, &n) in &types {
        words.push(t.bytes().map(|b| byte_id[b as usize]).collect());
        freq.push(n);
    }

    let mut counts: HashMap<Pair, u64> = HashMap::new();
    let mut holders: HashMap<Pair, BTreeSet<usize>> = HashMap::new();
    for (w, ids) in words.iter().enumerate() {
        for p in ids.windows(2) {
            let pair = (p[0], p[1]);
            *counts.entry(pair).or_default() += freq[w];
            holders.entry(pair).or_default().insert(w);
        }
    }
    let key = |pieces: &[Vec<u8>], p: Pair| Reverse((pieces[p.0 as usize].clone(), pieces[p.1 as usize].clone()));
    let mut heap: BinaryHeap<(u64, Reverse<(Vec<u8>, Vec<u8>)>, Pair)> =
        counts.iter().map(|(&p, &c)| (c, key(&pieces, p), p)).collect();

    let mut merges = Vec::new();
    while pieces.len() < vocab_size {
        let Some((count, _, pair)) = heap.pop() else { break };
        if counts.get(&pair).copied().unwrap_or(0) != count {
            continue;
        }
        if count < 2 {
            break;
        }
        let merged = pieces.len() as u32;
        let mut joined = pieces[pair.0 as usize].clone();
        joined.extend_from_slice(&pieces[pair.1 as usize]);
        pieces.push(joined);
        merges.push(pair);

        let mut touched: HashMap<Pair, ()> = HashMap::new();
        for w in holders.remove(&pair).unwrap_or_default() {
            let old = &words[w];
            if !old.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            let new = apply_merge(old, pair, merged);
            for p in old.windows(2) {
                let pr = (p[0], p[1]);
                if let Some(c) = counts.get_mut(&pr) {
                    *c -= freq[w];
                }
                touched.insert(pr, ());
            }
            for p in new.windows(2) {
                let pr = (p[0], p[1]);
                *counts.entry(pr).or_default() += freq[w];
                holders.entry(pr).or_default().insert(w);
                touched.insert(pr, ());
            }
            words[w] = new;
        }
        counts.remove(&pair);
        let mut touched: Vec<Pair> = touched.into_keys().collect();
        touched.sort_unstable();
        for p in touched {
            match counts.get(&p).copied() {
                Some(0) => {
                    counts.remove(&p);
                }
                Some(c) if p != pair => heap.push((c, key(&pieces, p), p)),
                _ => {}
            }
        }
    }
    Vocab::from_parts(&alphabet, merges, vocab_size, byte_fallback)
}
