//! Bias quantification on the −42 (left) … +42 (right) scale.

mod ratio;
mod regressor;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{lede, ArticleSet, LedeLevel, Side};
use crate::error::{Error, Result};

pub use ratio::{discriminativeness_ratio, RatioEntry, RatioTable, DEFAULT_ALPHA, DEFAULT_RATIO_MIN_COUNT};
pub use regressor::{train_regressor, BiasRegressor, RegressorOptions, TrainingReport};

pub const SCALE_LIMIT: f64 = 42.0;

/// Signed bias rating; negative leans left, positive leans right.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasScore(f64);

impl BiasScore {
    /// Clamps `value` into [−42, +42]. NaN maps to 0.
    pub fn new(value: f64) -> Self {
        Self::clamped(value).0
    }

    /// Like [`BiasScore::new`], also reporting whether clamping happened.
    pub fn clamped(value: f64) -> (Self, bool) {
        if value.is_nan() {
            return (BiasScore(0.0), true);
        }
        let v = value.clamp(-SCALE_LIMIT, SCALE_LIMIT);
        (BiasScore(v), v != value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn abs(self) -> f64 {
        self.0.abs()
    }
}

impl fmt::Display for BiasScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub side: Side,
    /// The score was exactly zero and the tie went to the right.
    pub tie: bool,
}

/// Sign rule: negative → left, positive → right, zero → right (flagged).
pub fn classify(s: BiasScore) -> Classification {
    let v = s.value();
    Classification { side: if v < 0.0 { Side::Left } else { Side::Right }, tie: v == 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub score: BiasScore,
    /// Input had no tokens; the score is defined as 0.
    pub empty_text: bool,
    pub clamped: bool,
}

/// Anything that can rate a text: the built-in regressor or a remote API.
pub trait Scorer: Send + Sync {
    fn score_text(&self, text: &str) -> Result<ScoreOutcome>;
}

impl Scorer for BiasRegressor {
    fn score_text(&self, text: &str) -> Result<ScoreOutcome> {
        Ok(self.score(text))
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score_text(&self, text: &str) -> Result<ScoreOutcome> {
        (**self).score_text(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GranularityRow {
    pub level: LedeLevel,
    pub mean_abs_score: f64,
}

/// Mean |score| of every article's text at each lede level.
pub fn granularity_profile<S: Scorer + ?Sized>(scorer: &S, set: &ArticleSet) -> Result<Vec<GranularityRow>> {
    if set.is_empty() {
        return Err(Error::Empty("granularity profile needs at least one article".into()));
    }
    LedeLevel::ALL
        .into_iter()
        .map(|level| {
            let mut total = 0.0;
            for a in set {
                total += scorer.score_text(&lede(a, level))?.score.abs();
            }
            Ok(GranularityRow { level, mean_abs_score: total / set.len() as f64 })
        })
        .collect()
}

pub fn granularity_tsv(rows: &[GranularityRow]) -> String {
    let mut out = String::from("level\tmean_abs_score\n");
    for r in rows {
        out.push_str(&format!("{}\t{:.6}\n", r.level.label(), r.mean_abs_score));
    }
    out
}
