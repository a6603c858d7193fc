use std::path::Path;

use crate::data::{read_lines, Direction, Lang};
use crate::{Error, Result};

/// A line-aligned English/Italian test set such as a news benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    pub english: Vec<String>,
    pub italian: Vec<String>,
}

impl EvalSet {
    pub fn new(english: Vec<String>, italian: Vec<String>) -> Result<Self> {
        if english.len() != italian.len() {
            return Err(Error::Input(format!(
                "evaluation set is misaligned: {} English vs {} Italian lines",
                english.len(),
                italian.len()
            )));
        }
        Ok(EvalSet { english, italian })
    }

    /// Reads `english<TAB>italian` lines.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        let mut english = Vec::new();
        let mut italian = Vec::new();
        for (i, line) in read_lines(path)?.into_iter().enumerate() {
            let mut cols = line.split('\t');
            match (cols.next(), cols.next()) {
                (Some(en), Some(it)) => {
                    english.push(en.to_string());
                    italian.push(it.to_string());
                }
                _ => return Err(Error::format(path, format!("line {}: expected two tab-separated columns", i + 1))),
            }
        }
        Self::new(english, italian)
    }

    pub fn from_aligned(english: &Path, italian: &Path) -> Result<Self> {
        Self::new(read_lines(english)?, read_lines(italian)?)
    }

    pub fn len(&self) -> usize {
        self.english.len()
    }

    pub fn is_empty(&self) -> bool {
        self.english.is_empty()
    }

    pub fn side(&self, lang: Lang) -> &[String] {
        match lang {
            Lang::English => &self.english,
            Lang::Italian => &self.italian,
        }
    }

    pub fn sources(&self, direction: Direction) -> &[String] {
        self.side(direction.source())
    }

    pub fn references(&self, direction: Direction) -> &[String] {
        self.side(direction.target())
    }
}
