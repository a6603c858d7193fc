use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const SYNTHETIC_TAG: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lang {
    English,
    Italian,
}

impl Lang {
    pub fn tag(self) -> &'static str {
        match self {
            Lang::English => "ENG:",
            Lang::Italian => "IT:",
        }
    }
}

/// Translation direction, written `en-it` / `it-en`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    EnIt,
    ItEn,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::EnIt, Direction::ItEn];

    pub fn source(self) -> Lang {
        match self {
            Direction::EnIt => Lang::English,
            Direction::ItEn => Lang::Italian,
        }
    }

    pub fn target(self) -> Lang {
        match self {
            Direction::EnIt => Lang::Italian,
            Direction::ItEn => Lang::English,
        }
    }

    pub fn from_source(lang: Lang) -> Self {
        match lang {
            Lang::English => Direction::EnIt,
            Lang::Italian => Direction::ItEn,
        }
    }

    pub fn reverse(self) -> Self {
        Direction::from_source(self.target())
    }

    pub fn code(self) -> &'static str {
        match self {
            Direction::EnIt => "en-it",
            Direction::ItEn => "it-en",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "en-it" | "en2it" | "enit" => Ok(Direction::EnIt),
            "it-en" | "it2en" | "iten" => Ok(Direction::ItEn),
            _ => Err(Error::Config(format!("unknown direction {s:?} (expected en-it or it-en)"))),
        }
    }
}

fn trim_newline(s: &str) -> &str {
    s.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    pub english: String,
    pub italian: String,
    pub source_tag: String,
    /// Side produced by machine translation, if any.
    pub synthetic_side: Option<Lang>,
}

impl SentencePair {
    /// Strips one trailing newline per side and rejects empty or multi-line text.
    pub fn new(english: &str, italian: &str, source_tag: &str) -> Result<Self> {
        let english = trim_newline(english);
        let italian = trim_newline(italian);
        for (side, text) in [("english", english), ("italian", italian)] {
            if text.trim().is_empty() {
                return Err(Error::Input(format!("{side} side is empty")));
            }
            if text.contains(['\n', '\r']) {
                return Err(Error::Input(format!("{side} side contains a line break")));
            }
        }
        Ok(SentencePair {
            english: english.to_string(),
            italian: italian.to_string(),
            source_tag: source_tag.to_string(),
            synthetic_side: None,
        })
    }

    pub fn side(&self, lang: Lang) -> &str {
        match lang {
            Lang::English => &self.english,
            Lang::Italian => &self.italian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormattedSample {
    pub text: String,
    pub direction: Direction,
}

pub fn format_sample(pair: &SentencePair, direction: Direction) -> FormattedSample {
    let (src, tgt) = (direction.source(), direction.target());
    FormattedSample {
        text: format!("{} {} {} {}", src.tag(), pair.side(src), tgt.tag(), pair.side(tgt)),
        direction,
    }
}

/// Both directions, English source first.
pub fn format_bidirectional<'a, I>(pairs: I) -> impl Iterator<Item = FormattedSample> + 'a
where
    I: IntoIterator<Item = &'a SentencePair>,
    I::IntoIter: 'a,
{
    pairs
        .into_iter()
        .flat_map(|p| Direction::BOTH.map(|d| format_sample(p, d)))
}

/// A synthetic pair trains only the direction whose source is the synthetic side.
pub fn format_pair(pair: &SentencePair) -> Vec<FormattedSample> {
    match pair.synthetic_side {
        Some(lang) => vec![format_sample(pair, Direction::from_source(lang))],
        None => Direction::BOTH.iter().map(|&d| format_sample(pair, d)).collect(),
    }
}
