use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::Direction;
use crate::{Error, Result};

pub const JUDGE_URL_ENV: &str = "DIETA_JUDGE_URL";
pub const MT_URL_ENV: &str = "DIETA_MT_URL";

/// Yes/no oracle for sentence-pair filtering.
pub trait Judge {
    fn ask(&self, prompt: &str) -> Result<String>;
}

/// Machine translation used for back-translation.
pub trait Translator {
    fn translate(&self, text: &str, direction: Direction) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: usize,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 1,
            backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        RetryPolicy {
            retries: 1,
            backoff: Duration::ZERO,
        }
    }

    /// Sleeps before attempt `attempt` (1-based retries), doubling each time.
    pub(crate) fn wait(&self, attempt: usize) {
        if attempt > 0 && !self.backoff.is_zero() {
            thread::sleep(self.backoff * (1 << (attempt - 1).min(10)) as u32);
        }
    }

    /// Runs `f` until it succeeds or the retries are spent.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            self.wait(attempt);
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if attempt >= self.retries => return Err(e),
                Err(_) => attempt += 1,
            }
        }
    }
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

pub(crate) fn post<T: for<'de> Deserialize<'de>>(agent: &ureq::Agent, url: &str, body: serde_json::Value) -> Result<T> {
    let mut resp = agent
        .post(url)
        .send_json(&body)
        .map_err(|e| Error::Client(format!("{url}: {e}")))?;
    resp.body_mut()
        .read_json::<T>()
        .map_err(|e| Error::Client(format!("{url}: bad response: {e}")))
}

/// `POST {"prompt"}` → `{"reply"}`.
pub struct HttpJudge {
    agent: ureq::Agent,
    url: String,
}

impl HttpJudge {
    pub fn new(url: &str, timeout: Duration) -> Self {
        HttpJudge {
            agent: agent(timeout),
            url: url.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct JudgeReply {
    reply: String,
}

impl Judge for HttpJudge {
    fn ask(&self, prompt: &str) -> Result<String> {
        post::<JudgeReply>(&self.agent, &self.url, json!({ "prompt": prompt })).map(|r| r.reply)
    }
}

/// `POST {"text", "direction"}` → `{"translation"}`.
pub struct HttpTranslator {
    agent: ureq::Agent,
    url: String,
}

impl HttpTranslator {
    pub fn new(url: &str, timeout: Duration) -> Self {
        HttpTranslator {
            agent: agent(timeout),
            url: url.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct MtReply {
    translation: String,
}

impl Translator for HttpTranslator {
    fn translate(&self, text: &str, direction: Direction) -> Result<String> {
        post::<MtReply>(
            &self.agent,
            &self.url,
            json!({ "text": text, "direction": direction.code() }),
        )
        .map(|r| r.translation)
    }
}

/// In-process judge and translator for offline runs, selected with a
/// `stub:` pseudo-URL.
///
/// * `stub:yes` / `stub:no` / `stub:reply=<text>` answer every prompt alike.
/// * `stub:reject=<needle>` answers "no" when the prompt contains `needle`.
/// * `stub:upper` / `stub:identity` / `stub:fail` translate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stub {
    Reply(String),
    Reject(String),
    Upper,
    Identity,
    Fail,
}

impl Stub {
    pub fn parse(url: &str) -> Option<Stub> {
        let spec = url.strip_prefix("stub:")?;
        Some(match spec.split_once('=') {
            Some(("reply", r)) => Stub::Reply(r.to_string()),
            Some(("reject", n)) => Stub::Reject(n.to_string()),
            _ => match spec {
                "yes" => Stub::Reply("yes".into()),
                "no" => Stub::Reply("no".into()),
                "upper" => Stub::Upper,
                "identity" => Stub::Identity,
                "fail" => Stub::Fail,
                _ => return None,
            },
        })
    }
}

impl Judge for Stub {
    fn ask(&self, prompt: &str) -> Result<String> {
        match self {
            Stub::Reply(r) => Ok(r.clone()),
            Stub::Reject(needle) => Ok(if prompt.contains(needle.as_str()) { "no" } else { "yes" }.into()),
            Stub::Fail => Err(Error::Client("stub judge failure".into())),
            Stub::Upper | Stub::Identity => Ok("yes".into()),
        }
    }
}

impl Translator for Stub {
    fn translate(&self, text: &str, _direction: Direction) -> Result<String> {
        match self {
            Stub::Upper => Ok(text.to_uppercase()),
            Stub::Fail => Err(Error::Client("stub translator failure".into())),
            _ => Ok(text.to_string()),
        }
    }
}
