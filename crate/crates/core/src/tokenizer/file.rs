//! Vocab files: one header line, then `piece<TAB>rank` per non-special id,
//! with a third `left right` column on merged pieces. Piece bytes are written
//! through the reversible byte-to-printable-character table popularised by
//! GPT-2, so a leading space shows as `Ġ`.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use super::{Vocab, NUM_SPECIALS, SPECIAL_NAMES};
use crate::{Error, Result};

const HEADER: &str = "#dieta-vocab";

fn byte_chars() -> &'static ([char; 256], std::collections::HashMap<char, u8>) {
    static TABLE: OnceLock<([char; 256], std::collections::HashMap<char, u8>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..=255u8 {
            let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
            table[b as usize] = if printable {
                char::from(b)
            } else {
                extra += 1;
                char::from_u32(255 + extra).expect("valid code point")
            };
        }
        let back = table.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        (table, back)
    })
}

pub fn piece_to_text(bytes: &[u8]) -> String {
    let (table, _) = byte_chars();
    bytes.iter().map(|&b| table[b as usize]).collect()
}

pub fn text_to_piece(text: &str) -> Option<Vec<u8>> {
    let (_, back) = byte_chars();
    text.chars().map(|c| back.get(&c).copied()).collect()
}

impl Vocab {
    pub fn to_text(&self) -> String {
        let specials: Vec<String> = SPECIAL_NAMES.iter().enumerate().map(|(i, n)| format!("{n}:{i}")).collect();
        let mut out = format!(
            "{HEADER}\tsize={}\tbyte_fallback={}\tspecials={}\n",
            self.declared_size(),
            self.byte_fallback(),
            specials.join(",")
        );
        let first_merge = self.first_merge_id() as usize;
        for id in NUM_SPECIALS..self.len() {
            out.push_str(&piece_to_text(self.piece(id as u32).expect("id in range")));
            out.push('\t');
            out.push_str(&id.to_string());
            if id >= first_merge {
                let (l, r) = self.merges()[id - first_merge];
                out.push_str(&format!("\t{l} {r}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::format(path, format!("line {line}: {reason}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut fields = header.split('\t');
        if fields.next() != Some(HEADER) {
            return Err(bad(1, "not a dieta vocab file"));
        }
        let (mut size, mut byte_fallback, mut specials) = (None, None, None);
        for f in fields {
            match f.split_once('=') {
                Some(("size", v)) => size = v.parse::<usize>().ok(),
                Some(("byte_fallback", v)) => byte_fallback = v.parse::<bool>().ok(),
                Some(("specials", v)) => specials = Some(v.to_string()),
                _ => return Err(bad(1, &format!("unknown header field {f:?}"))),
            }
        }
        let size = size.ok_or_else(|| bad(1, "missing size"))?;
        let byte_fallback = byte_fallback.ok_or_else(|| bad(1, "missing byte_fallback"))?;
        let expected: Vec<String> = SPECIAL_NAMES.iter().enumerate().map(|(i, n)| format!("{n}:{i}")).collect();
        if specials.as_deref() != Some(expected.join(",").as_str()) {
            return Err(bad(1, "unexpected special tokens"));
        }

        let mut alphabet = Vec::new();
        let mut merges = Vec::new();
        let mut listed = Vec::new();
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let id = NUM_SPECIALS + k;
            let cols: Vec<&str> = line.split('\t').collect();
            let piece = cols
                .first()
                .and_then(|c| text_to_piece(c))
                .ok_or_else(|| bad(lineno, "unreadable piece"))?;
            if cols.get(1).and_then(|r| r.parse::<usize>().ok()) != Some(id) {
                return Err(bad(lineno, &format!("expected rank {id}")));
            }
            listed.push(piece.clone());
            match cols.len() {
                2 if merges.is_empty() && piece.len() == 1 => alphabet.push(piece[0]),
                3 => {
                    let (l, r) = cols[2]
                        .split_once(' ')
                        .and_then(|(l, r)| Some((l.parse::<u32>().ok()?, r.parse::<u32>().ok()?)))
                        .ok_or_else(|| bad(lineno, "malformed merge column"))?;
                    merges.push((l, r));
                }
                _ => return Err(bad(lineno, "malformed entry")),
            }
        }
        let vocab = Vocab::from_parts(&alphabet, merges, size, byte_fallback).map_err(|e| Error::format(path, e.to_string()))?;
        // The stored spelling of each merge must agree with its parts.
        for (k, piece) in listed.iter().enumerate() {
            if vocab.piece((NUM_SPECIALS + k) as u32) != Some(piece.as_slice()) {
                return Err(bad(k + 2, "piece does not equal its merge parts"));
            }
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::format(path, "not UTF-8"),
            _ => Error::Io(e),
        })?;
        Vocab::from_text(&text, path)
    }
}
