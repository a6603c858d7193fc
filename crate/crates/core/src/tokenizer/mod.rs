//! Byte-level BPE tokenizer.
//!
//! Ids `0..3` are the specials, `3..3+alphabet` are single bytes, and every
//! later id is a learned merge of two earlier ids.

mod file;
mod train;


use std::collections::HashMap;

use crate::{Error, Result};

pub use train::train_bpe;

pub const PAD: u32 = 0;
pub const EOS: u32 = 1;
pub const UNK: u32 = 2;
pub const NUM_SPECIALS: usize = 3;
pub const SPECIAL_NAMES: [&str; NUM_SPECIALS] = ["<pad>", "</s>", "<unk>"];

/// Vocabulary size of the full-size preset.
pub const PAPER_VOCAB_SIZE: usize = 51_200;
pub const DEFAULT_VOCAB_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    pieces: Vec<Vec<u8>>,
    /// `(left, right)` for each merged id, indexed by `id - first_merge`.
    merges: Vec<(u32, u32)>,
    byte_ids: [Option<u32>; 256],
    merge_rank: HashMap<(u32, u32), u32>,
    piece_ids: HashMap<Vec<u8>, u32>,
    declared_size: usize,
    byte_fallback: bool,
}

impl Vocab {
    pub(crate) fn from_parts(
        alphabet: &[u8],
        merges: Vec<(u32, u32)>,
        declared_size: usize,
        byte_fallback: bool,
    ) -> Result<Self> {
        let mut pieces: Vec<Vec<u8>> = SPECIAL_NAMES.iter().map(|s| s.as_bytes().to_vec()).collect();
        let mut byte_ids = [None; 256];
        for (i, &b) in alphabet.iter().enumerate() {
            if i > 0 && alphabet[i - 1] >= b {
                return Err(Error::Input("byte alphabet must be strictly increasing".into()));
            }
            byte_ids[b as usize] = Some(pieces.len() as u32);
            pieces.push(vec![b]);
        }
        let mut merge_rank = HashMap::new();
        for (rank, &(l, r)) in merges.iter().enumerate() {
            let n = pieces.len() as u32;
            if l < NUM_SPECIALS as u32 || r < NUM_SPECIALS as u32 || l >= n || r >= n {
                return Err(Error::Input(format!("merge {rank} refers to an invalid id")));
            }
            let mut joined = pieces[l as usize].clone();
            joined.extend_from_slice(&pieces[r as usize]);
            if merge_rank.insert((l, r), rank as u32).is_some() {
                return Err(Error::Input(format!("merge {rank} is repeated")));
            }
            pieces.push(joined);
        }
        if pieces.len() > declared_size {
            return Err(Error::Input(format!(
                "{} pieces exceed the declared size {declared_size}",
                pieces.len()
            )));
        }
        let mut piece_ids = HashMap::new();
        for (id, p) in pieces.iter().enumerate().skip(NUM_SPECIALS) {
            if piece_ids.insert(p.clone(), id as u32).is_some() {
                return Err(Error::Input(format!("piece id {id} duplicates an earlier piece")));
            }
        }
        Ok(Vocab {
            pieces,
            merges,
            byte_ids,
            merge_rank,
            piece_ids,
            declared_size,
            byte_fallback,
        })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn declared_size(&self) -> usize {
        self.declared_size
    }

    pub fn byte_fallback(&self) -> bool {
        self.byte_fallback
    }

    pub fn first_merge_id(&self) -> u32 {
        (self.pieces.len() - self.merges.len()) as u32
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn piece(&self, id: u32) -> Option<&[u8]> {
        self.pieces.get(id as usize).map(Vec::as_slice)
    }

    pub fn id_of(&self, piece: &[u8]) -> Option<u32> {
        self.piece_ids.get(piece).copied()
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < NUM_SPECIALS
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for chunk in pretokenize(text) {
            self.encode_chunk(chunk.as_bytes(), &mut out);
        }
        out
    }

    fn encode_chunk(&self, bytes: &[u8], out: &mut Vec<u32>) {
        let mut ids: Vec<u32> = bytes
            .iter()
            .map(|&b| self.byte_ids[b as usize].unwrap_or(UNK))
            .collect();
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.merge_rank.get(&(w[0], w[1])).map(|&r| (r, (w[0], w[1]))))
                .min();
            let Some((rank, pair)) = best else { break };
            let merged = self.first_merge_id() + rank;
            ids = apply_merge(&ids, pair, merged);
        }
        out.extend(ids);
    }

    /// Joins piece bytes; PAD and EOS vanish and UNK becomes U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for &id in ids {
            match id {
                PAD | EOS => {}
                UNK => bytes.extend_from_slice("\u{FFFD}".as_bytes()),
                _ => bytes.extend_from_slice(self.piece(id).ok_or(Error::Index {
                    what: "token id",
                    index: id as usize,
                    bound: self.pieces.len(),
                })?),
            }
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Merges every non-overlapping occurrence of `pair`, scanning left to right.
pub(crate) fn apply_merge(ids: &[u32], pair: (u32, u32), merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    out
}

/// Splits text into merge domains: a non-whitespace run together with one
/// directly preceding ASCII space, or a run of other whitespace.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        let end = i + c.len_utf8();
        match runs.last_mut() {
            Some(last) if last.2 == ws => last.1 = end,
            _ => runs.push((i, end, ws)),
        }
    }
    let mut chunks = Vec::with_capacity(runs.len());
    let mut carry = None;
    for (k, &(start, end, ws)) in runs.iter().enumerate() {
        if ws {
            let before_word = k + 1 < runs.len() && text[..end].ends_with(' ');
            let cut = if before_word { end - 1 } else { end };
            if start < cut {
                chunks.push(&text[start..cut]);
            }
            carry = before_word.then_some(cut);
        } else {
            chunks.push(&text[carry.take().unwrap_or(start)..end]);
        }
    }
    chunks
}
