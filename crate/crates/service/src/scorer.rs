//! Client for a remote bias-scoring API.

use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use newsbias_core::bias::{BiasRegressor, BiasScore, ScoreOutcome, Scorer};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScorerConfig {
    pub endpoint: String,
    /// Per-attempt timeout.
    pub timeout: Duration,
    /// Extra attempts after the first one fails transiently.
    pub retries: u32,
    pub retry_delay: Duration,
    /// Request field carrying the text.
    pub text_field: String,
    /// Dotted path of the score in the response, e.g. `result.bias`.
    pub score_field: String,
}

impl ExternalScorerConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            retries: 2,
            retry_delay: Duration::from_millis(200),
            text_field: "text".into(),
            score_field: "score".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(ServiceError::BadRequest("external scorer timeout must be positive".into()));
        }
        if self.endpoint.is_empty() {
            return Err(ServiceError::BadRequest("external scorer endpoint is empty".into()));
        }
        Ok(())
    }
}

enum Attempt {
    Done(f64),
    Transient(String),
    Fatal(ServiceError),
}

fn extract(body: &Value, path: &str) -> Result<f64> {
    let pointer = format!("/{}", path.replace('.', "/"));
    let v = body.pointer(&pointer).ok_or_else(|| ServiceError::ScorerResponse(format!("field {path:?} missing")))?;
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    };
    x.filter(|x| x.is_finite())
        .ok_or_else(|| ServiceError::ScorerResponse(format!("field {path:?} is not a finite number: {v}")))
}

fn attempt(agent: &Agent, cfg: &ExternalScorerConfig, text: &str) -> Attempt {
    let mut req = serde_json::Map::new();
    req.insert(cfg.text_field.clone(), json!(text));
    let mut resp = match agent.post(&cfg.endpoint).send_json(Value::Object(req)) {
        Ok(r) => r,
        Err(e) => return Attempt::Transient(e.to_string()),
    };
    let status = resp.status();
    if status.is_server_error() || status.as_u16() == 429 {
        return Attempt::Transient(format!("HTTP {status}"));
    }
    if !status.is_success() {
        return Attempt::Fatal(ServiceError::ScorerResponse(format!("HTTP {status}")));
    }
    match resp.body_mut().read_json::<Value>() {
        Ok(body) => match extract(&body, &cfg.score_field) {
            Ok(x) => Attempt::Done(x),
            Err(e) => Attempt::Fatal(e),
        },
        Err(e) => Attempt::Fatal(ServiceError::ScorerResponse(e.to_string())),
    }
}

/// Scores `text` remotely. Connection failures, timeouts, 5xx and 429 are
/// retried up to `cfg.retries` times; out-of-scale scores are clamped.
pub fn external_score(cfg: &ExternalScorerConfig, text: &str) -> Result<ScoreOutcome> {
    cfg.validate()?;
    let agent: Agent =
        Agent::config_builder().timeout_global(Some(cfg.timeout)).http_status_as_error(false).build().into();
    let mut last = String::new();
    for i in 0..=cfg.retries {
        if i > 0 {
            thread::sleep(cfg.retry_delay);
        }
        match attempt(&agent, cfg, text) {
            Attempt::Done(x) => {
                let (score, clamped) = BiasScore::clamped(x);
                if clamped {
                    log::warn!("external score {x} clamped to {score}");
                }
                return Ok(ScoreOutcome { score, empty_text: false, clamped });
            }
            Attempt::Fatal(e) => return Err(e),
            Attempt::Transient(why) => {
                log::warn!("external scorer attempt {} failed: {why}", i + 1);
                last = why;
            }
        }
    }
    Err(ServiceError::ScorerUnavailable(format!("{} attempts failed, last: {last}", cfg.retries + 1)))
}

/// What to do when the remote scorer cannot be reached.
#[derive(Debug, Clone)]
pub enum FallbackPolicy {
    Fail,
    Builtin(BiasRegressor),
}

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub config: ExternalScorerConfig,
    pub fallback: FallbackPolicy,
}

impl Scorer for ExternalScorer {
    fn score_text(&self, text: &str) -> newsbias_core::Result<ScoreOutcome> {
        match (external_score(&self.config, text), &self.fallback) {
            (Ok(o), _) => Ok(o),
            (Err(ServiceError::ScorerUnavailable(why)), FallbackPolicy::Builtin(reg)) => {
                log::warn!("falling back to the built-in regressor: {why}");
                Ok(reg.score(text))
            }
            (Err(e), _) => Err(e.into()),
        }
    }
}
