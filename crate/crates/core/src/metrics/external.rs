use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::MetricValue;
use crate::data::{agent, post};
use crate::{Error, Result};

pub const SCORER_URL_ENV: &str = "DIETA_SCORER_URL";

/// A neural segment-level scorer reached over some transport.
pub trait Scorer {
    fn name(&self) -> &str;
    /// Whether the scorer needs references (reference-free QE otherwise).
    fn reference_based(&self) -> bool;
    fn score(&self, sources: &[String], hypotheses: &[String], references: Option<&[String]>) -> Result<Vec<f64>>;
}

/// `POST {"src", "hyp", "ref"?}` → `{"scores"}`.
pub struct HttpScorer {
    agent: ureq::Agent,
    url: String,
    name: String,
    reference_based: bool,
}

impl HttpScorer {
    pub fn new(name: &str, url: &str, reference_based: bool, timeout: Duration) -> Self {
        HttpScorer {
            agent: agent(timeout),
            url: url.to_string(),
            name: name.to_string(),
            reference_based,
        }
    }
}

#[derive(Deserialize)]
struct ScoreReply {
    scores: Vec<f64>,
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn reference_based(&self) -> bool {
        self.reference_based
    }

    fn score(&self, sources: &[String], hypotheses: &[String], references: Option<&[String]>) -> Result<Vec<f64>> {
        let mut body = json!({ "src": sources, "hyp": hypotheses });
        if let Some(r) = references {
            body["ref"] = json!(r);
        }
        post::<ScoreReply>(&self.agent, &self.url, body).map(|r| r.scores)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum StubScores {
    Constant(f64),
    Fixed(Vec<f64>),
    Fail,
}

/// In-process scorer for tests and offline runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StubScorer {
    name: String,
    reference_based: bool,
    scores: StubScores,
}

impl StubScorer {
    pub fn constant(name: &str, value: f64) -> Self {
        Self::with(name, StubScores::Constant(value))
    }

    pub fn fixed(name: &str, scores: Vec<f64>) -> Self {
        Self::with(name, StubScores::Fixed(scores))
    }

    pub fn failing(name: &str) -> Self {
        Self::with(name, StubScores::Fail)
    }

    fn with(name: &str, scores: StubScores) -> Self {
        StubScorer {
            name: name.to_string(),
            reference_based: false,
            scores,
        }
    }

    pub fn reference_based(mut self, yes: bool) -> Self {
        self.reference_based = yes;
        self
    }
}

impl Scorer for StubScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn reference_based(&self) -> bool {
        self.reference_based
    }

    fn score(&self, _: &[String], hypotheses: &[String], _: Option<&[String]>) -> Result<Vec<f64>> {
        match &self.scores {
            StubScores::Constant(v) => Ok(vec![*v; hypotheses.len()]),
            StubScores::Fixed(v) => Ok(v.clone()),
            StubScores::Fail => Err(Error::Client(format!("{}: stub failure", self.name))),
        }
    }
}

/// Segment scores from an external scorer; `value` is absent when the
/// endpoint failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScore {
    pub scorer: String,
    pub segments: Vec<f64>,
    pub value: MetricValue,
}

/// Scores a corpus with `scorer`. Contract violations are errors; transport
/// or endpoint failures yield an absent value carrying the error text.
pub fn score_external<S: AsRef<str>>(
    hypotheses: &[S],
    sources: &[S],
    references: Option<&[S]>,
    scorer: &dyn Scorer,
) -> Result<ExternalScore> {
    let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
    if hypotheses.is_empty() {
        return Err(Error::Contract("cannot score an empty corpus".into()));
    }
    if sources.len() != hypotheses.len() {
        return Err(Error::Contract(format!(
            "{} hypotheses but {} sources",
            hypotheses.len(),
            sources.len()
        )));
    }
    let references = match (references, scorer.reference_based()) {
        (None, true) => {
            return Err(Error::Contract(format!("{} needs references", scorer.name())));
        }
        (Some(r), _) if r.len() != hypotheses.len() => {
            return Err(Error::Contract(format!(
                "{} hypotheses but {} references",
                hypotheses.len(),
                r.len()
            )));
        }
        (r, true) => r.map(own),
        (_, false) => None,
    };
    let (hyps, srcs) = (own(hypotheses), own(sources));
    let outcome = scorer.score(&srcs, &hyps, references.as_deref()).and_then(|s| {
        if s.len() != hyps.len() {
            Err(Error::Client(format!(
                "{} returned {} scores for {} segments",
                scorer.name(),
                s.len(),
                hyps.len()
            )))
        } else if s.iter().any(|v| !v.is_finite()) {
            Err(Error::Client(format!("{} returned a non-finite score", scorer.name())))
        } else {
            Ok(s)
        }
    });
    Ok(match outcome {
        Ok(segments) => ExternalScore {
            scorer: scorer.name().to_string(),
            value: MetricValue::Score(segments.iter().sum::<f64>() / segments.len() as f64),
            segments,
        },
        Err(e) => {
            log::warn!("{}: {e}", scorer.name());
            ExternalScore {
                scorer: scorer.name().to_string(),
                segments: Vec::new(),
                value: MetricValue::Absent(e.to_string()),
            }
        }
    })
}
