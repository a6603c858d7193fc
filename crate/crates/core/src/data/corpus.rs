use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Lang, Rejection, SentencePair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub lines: usize,
    /// Lines where either side was blank.
    pub blank: usize,
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path).map_err(|e| open_error(path, e))?);
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.map(|l| l.trim_end_matches('\r').to_string())
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn open_error(path: &Path, e: std::io::Error) -> Error {
    Error::Input(format!("cannot open {}: {e}", path.display()))
}

/// Reads two line-aligned files. Unequal line counts are an error.
pub fn read_aligned(english: &Path, italian: &Path, tag: &str) -> Result<(Vec<SentencePair>, ReadStats)> {
    let en = read_lines(english)?;
    let it = read_lines(italian)?;
    if en.len() != it.len() {
        return Err(Error::Input(format!(
            "misaligned corpus: {} has {} lines but {} has {} lines (first unmatched line {})",
            english.display(),
            en.len(),
            italian.display(),
            it.len(),
            en.len().min(it.len()) + 1
        )));
    }
    let mut stats = ReadStats {
        lines: en.len(),
        blank: 0,
    };
    let mut pairs = Vec::with_capacity(en.len());
    for (e, i) in en.iter().zip(&it) {
        match SentencePair::new(e, i, tag) {
            Ok(p) => pairs.push(p),
            Err(_) => stats.blank += 1,
        }
    }
    Ok((pairs, stats))
}

/// Reads `english<TAB>italian[<TAB>tag[<TAB>synthetic side]]` lines.
pub fn read_tsv(path: &Path, default_tag: &str) -> Result<(Vec<SentencePair>, ReadStats)> {
    let lines = read_lines(path)?;
    let mut stats = ReadStats {
        lines: lines.len(),
        blank: 0,
    };
    let mut pairs = Vec::with_capacity(lines.len());
    for (n, line) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 4 {
            return Err(Error::format(path, format!("line {}: expected 2 to 4 tab-separated columns", n + 1)));
        }
        let tag = cols.get(2).copied().filter(|t| !t.is_empty()).unwrap_or(default_tag);
        let mut pair = match SentencePair::new(cols[0], cols[1], tag) {
            Ok(p) => p,
            Err(_) => {
                stats.blank += 1;
                continue;
            }
        };
        pair.synthetic_side = match cols.get(3).copied() {
            None | Some("") => None,
            Some("en") => Some(Lang::English),
            Some("it") => Some(Lang::Italian),
            Some(other) => {
                return Err(Error::format(path, format!("line {}: unknown synthetic side {other:?}", n + 1)))
            }
        };
        pairs.push(pair);
    }
    Ok((pairs, stats))
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in lines {
        w.write_all(l.as_ref().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs_tsv(path: &Path, pairs: &[SentencePair]) -> Result<()> {
    let lines: Vec<String> = pairs
        .iter()
        .map(|p| {
            let side = match p.synthetic_side {
                Some(Lang::English) => "\ten",
                Some(Lang::Italian) => "\tit",
                None => "",
            };
            format!("{}\t{}\t{}{side}", p.english, p.italian, p.source_tag)
        })
        .collect();
    write_lines(path, &lines)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

/// `position<TAB>reason<TAB>english<TAB>italian<TAB>raw reply`, with the reply escaped.
pub fn write_rejections(path: &Path, rejections: &[Rejection]) -> Result<()> {
    let lines: Vec<String> = rejections
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}\t{}",
                r.position,
                r.reason.as_str(),
                r.pair.english,
                r.pair.italian,
                escape(&r.raw_reply)
            )
        })
        .collect();
    write_lines(path, &lines)
}
