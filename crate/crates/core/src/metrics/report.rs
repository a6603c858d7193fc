use std::collections::BTreeSet;

use crate::data::Direction;
use crate::trainer::RecipeName;

/// Suffix marking systems decoded with five beams.
pub const BEAM_SUFFIX: &str = "-b5";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
}

impl Polarity {
    pub fn arrow(self) -> &'static str {
        match self {
            Polarity::HigherIsBetter => "↑",
            Polarity::LowerIsBetter => "↓",
        }
    }
}

/// MetricX variants are error scores; everything else rewards higher values.
pub fn polarity(metric: &str) -> Polarity {
    if metric.to_lowercase().contains("metricx") {
        Polarity::LowerIsBetter
    } else {
        Polarity::HigherIsBetter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Score(f64),
    /// Not computed; the string says why.
    Absent(String),
}

impl MetricValue {
    pub fn score(&self) -> Option<f64> {
        match self {
            MetricValue::Score(v) => Some(*v),
            MetricValue::Absent(_) => None,
        }
    }
}

/// Scores of one system in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub system: String,
    pub direction: Direction,
    pub scores: Vec<(String, MetricValue)>,
    /// Scorer settings worth printing under the table, e.g. a BLEU signature.
    pub signatures: Vec<(String, String)>,
}

impl MetricReport {
    pub fn new(system: &str, direction: Direction) -> Self {
        MetricReport {
            system: system.to_string(),
            direction,
            scores: Vec::new(),
            signatures: Vec::new(),
        }
    }

    /// Sets `metric`, replacing an earlier value.
    pub fn set(&mut self, metric: &str, value: MetricValue) -> &mut Self {
        match self.scores.iter_mut().find(|(m, _)| m == metric) {
            Some(slot) => slot.1 = value,
            None => self.scores.push((metric.to_string(), value)),
        }
        self
    }

    pub fn sign(&mut self, metric: &str, signature: &str) -> &mut Self {
        self.signatures.retain(|(m, _)| m != metric);
        self.signatures.push((metric.to_string(), signature.to_string()));
        self
    }

    pub fn get(&self, metric: &str) -> Option<&MetricValue> {
        self.scores.iter().find(|(m, _)| m == metric).map(|(_, v)| v)
    }
}

/// A rendered leaderboard: header, one row per system, footnotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t") + "\n";
        for r in &self.rows {
            out += &(r.join("\t") + "\n");
        }
        for n in &self.notes {
            out += &format!("# {n}\n");
        }
        out
    }

    /// Space-padded columns; the system column is left-aligned, scores right.
    pub fn to_text(&self) -> String {
        let width = |s: &str| s.chars().count();
        let mut widths: Vec<usize> = self.header.iter().map(|h| width(h)).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(width(c));
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                let pad = " ".repeat(w - width(c));
                if i == 0 {
                    s += &format!("{c}{pad}");
                } else {
                    s += &format!("  {pad}{c}");
                }
            }
            s + "\n"
        };
        let mut out = line(&self.header);
        out += &(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n");
        for r in &self.rows {
            out += &line(r);
        }
        if !self.notes.is_empty() {
            out += "\n";
            for n in &self.notes {
                out += &format!("{n}\n");
            }
        }
        out
    }
}

fn sort_key(system: &str) -> (bool, usize, String, bool, String) {
    let (base, beam) = match system.strip_suffix(BEAM_SUFFIX) {
        Some(b) => (b, true),
        None => (system, false),
    };
    let recipe = base.strip_prefix(RecipeName::Dieta.label()).and_then(|rest| {
        RecipeName::ALL
            .iter()
            .position(|r| *r != RecipeName::Dieta && r.label() == rest)
            .or((rest.is_empty()).then_some(0))
    });
    match recipe {
        Some(rank) => (true, rank, String::new(), beam, system.to_string()),
        None => (false, 0, system.to_lowercase(), false, system.to_string()),
    }
}

fn cell(metric: &str, v: Option<&MetricValue>) -> String {
    let lower = metric.to_lowercase();
    match v.and_then(MetricValue::score) {
        Some(x) if lower == "bleu" || lower == "chrf" => format!("{x:.2}"),
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

/// Builds the system × (metric, direction) grid. Systems are ordered
/// case-insensitively with the DIETA variants last; columns follow the
/// first appearance of each metric, en→it before it→en.
pub fn render_report(reports: &[MetricReport]) -> Table {
    let mut metrics: Vec<&str> = Vec::new();
    for r in reports {
        for (m, _) in &r.scores {
            if !metrics.contains(&m.as_str()) {
                metrics.push(m);
            }
        }
    }
    let mut columns = Vec::new();
    for m in &metrics {
        for d in Direction::BOTH {
            if reports.iter().any(|r| r.direction == d && r.get(m).is_some()) {
                columns.push((*m, d));
            }
        }
    }
    let mut systems: Vec<&str> = reports.iter().map(|r| r.system.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    systems.sort_by_key(|s| sort_key(s));

    let find = |s: &str, m: &str, d: Direction| {
        reports.iter().rev().find(|r| r.system == s && r.direction == d).and_then(|r| r.get(m))
    };
    let mut header = vec!["system".to_string()];
    header.extend(columns.iter().map(|(m, d)| format!("{m}({}) {}", polarity(m).arrow(), arrow_code(*d))));
    let rows = systems
        .iter()
        .map(|s| {
            let mut row = vec![s.to_string()];
            row.extend(columns.iter().map(|(m, d)| cell(m, find(s, m, *d))));
            row
        })
        .collect();

    let mut notes = Vec::new();
    let mut seen = BTreeSet::new();
    for r in reports {
        for (m, sig) in &r.signatures {
            if seen.insert((m.clone(), sig.clone())) {
                notes.push(format!("{m} signature: {sig}"));
            }
        }
    }
    for r in reports {
        for (m, v) in &r.scores {
            if let MetricValue::Absent(why) = v {
                notes.push(format!("{} {m} {}: absent ({why})", r.system, arrow_code(r.direction)));
            }
        }
    }
    if systems.iter().any(|s| s.ends_with(BEAM_SUFFIX)) {
        notes.push(format!("The suffix {BEAM_SUFFIX} marks decoding with beam search over 5 beams."));
    }
    Table { header, rows, notes }
}

fn arrow_code(d: Direction) -> &'static str {
    match d {
        Direction::EnIt => "en→it",
        Direction::ItEn => "it→en",
    }
}
