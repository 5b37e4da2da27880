//! Ridge regression on TF-IDF features, scoring texts on the bias scale.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiasScore, ScoreOutcome};
use crate::corpus::{train_test_split, Article, ArticleSet};
use crate::error::{Error, Result};
use crate::features::{sparse_dot, TfIdf};
use crate::io;
use crate::linear::ridge_weighted;

const FORMAT: &str = "newsbias-regressor";
const VERSION: u32 = 1;
pub const MIN_LABELED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorOptions {
    /// L2 strength on the mean squared error.
    pub reg: f64,
    /// Minimum number of distinct documents a term must occur in.
    pub min_df: usize,
    /// Fraction of articles held out for the error report.
    pub holdout: f64,
    pub rng_seed: u64,
}

impl Default for RegressorOptions {
    fn default() -> Self {
        Self { reg: 1e-3, min_df: 2, holdout: 0.2, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_size: usize,
    pub holdout_size: usize,
    pub holdout_mae: Option<f64>,
    pub holdout_sign_accuracy: Option<f64>,
    pub features: usize,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRegressor {
    format: String,
    version: u32,
    features: TfIdf,
    weights: Vec<f64>,
    intercept: f64,
    reg: f64,
}

impl BiasRegressor {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn features(&self) -> &TfIdf {
        &self.features
    }

    /// Unclamped linear prediction.
    pub fn raw(&self, text: &str) -> f64 {
        sparse_dot(&self.features.transform(text), &self.weights) + self.intercept
    }

    /// Text without any tokens scores 0 and is flagged.
    pub fn score(&self, text: &str) -> ScoreOutcome {
        if crate::tokenizer::word_tokens(text).is_empty() {
            log::warn!("scoring empty text; returning 0");
            return ScoreOutcome { score: BiasScore::new(0.0), empty_text: true, clamped: false };
        }
        let (score, clamped) = BiasScore::clamped(self.raw(text));
        ScoreOutcome { score, empty_text: false, clamped }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut r: BiasRegressor = serde_json::from_str(s)?;
        if r.format != FORMAT || r.version != VERSION {
            return Err(Error::Format(format!("expected {FORMAT} v{VERSION}, found {} v{}", r.format, r.version)));
        }
        r.features = r.features.reindex();
        if r.weights.len() != r.features.dim() {
            return Err(Error::Format("regressor weight count does not match its feature space".into()));
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic_str(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_to_string(path)?)
    }
}

fn labels(set: &ArticleSet) -> Result<Vec<f64>> {
    set.iter()
        .map(|a| {
            a.bias.map(BiasScore::value).ok_or_else(|| Error::Argument(format!("article {:?} has no bias label", a.id)))
        })
        .collect()
}

fn fit(articles: &[Article], y: &[f64], opts: &RegressorOptions) -> Result<(BiasRegressor, usize)> {
    // Identical (body, label) rows are merged into one weighted row so that
    // repeating the training data yields the same problem bit for bit.
    let n = articles.len() as f64;
    let mut slot: HashMap<(&str, u64), usize> = HashMap::new();
    let mut unique: Vec<(&str, f64, f64)> = Vec::new();
    for (a, &label) in articles.iter().zip(y) {
        let k = *slot.entry((a.body.as_str(), label.to_bits())).or_insert_with(|| {
            unique.push((a.body.as_str(), label, 0.0));
            unique.len() - 1
        });
        unique[k].2 += 1.0;
    }
    let features = TfIdf::fit(unique.iter().map(|u| u.0), opts.min_df)?;
    let rows: Vec<_> = unique.iter().map(|u| features.transform(u.0)).collect();
    let targets: Vec<f64> = unique.iter().map(|u| u.1).collect();
    let weights: Vec<f64> = unique.iter().map(|u| u.2 / n).collect();
    let lf = ridge_weighted(&rows, features.dim(), &targets, &weights, opts.reg)?;
    let reg = BiasRegressor {
        format: FORMAT.into(),
        version: VERSION,
        features,
        weights: lf.weights,
        intercept: lf.intercept,
        reg: opts.reg,
    };
    Ok((reg, lf.iterations))
}

/// Trains on article bodies against their bias labels. A seeded holdout
/// measures error; the returned model is refit on every article.
pub fn train_regressor(labeled: &ArticleSet, opts: &RegressorOptions) -> Result<(BiasRegressor, TrainingReport)> {
    let y = labels(labeled)?;
    if y.len() < MIN_LABELED {
        return Err(Error::Argument(format!("need at least {MIN_LABELED} labeled articles, got {}", y.len())));
    }
    if !(y.iter().any(|&v| v < 0.0) && y.iter().any(|&v| v > 0.0)) {
        return Err(Error::Argument("labels must include both left (negative) and right (positive) scores".into()));
    }
    if !(0.0..1.0).contains(&opts.holdout) {
        return Err(Error::Argument(format!("holdout fraction must be in [0, 1), got {}", opts.holdout)));
    }

    let holdout_size = (labeled.len() as f64 * opts.holdout).round() as usize;
    let (mut mae, mut acc) = (None, None);
    if holdout_size > 0 {
        let (train, test) = train_test_split(labeled, holdout_size, opts.rng_seed)?;
        let (model, _) = fit(train.articles(), &labels(&train)?, opts)?;
        let truth = labels(&test)?;
        let preds: Vec<f64> = test.iter().map(|a| model.score(&a.body).score.value()).collect();
        let m = preds.len() as f64;
        mae = Some(preds.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / m);
        let agree = preds.iter().zip(&truth).filter(|(p, t)| (**p < 0.0) == (**t < 0.0)).count();
        acc = Some(agree as f64 / m);
    }

    let (model, iterations) = fit(labeled.articles(), &y, opts)?;
    let report = TrainingReport {
        train_size: labeled.len() - holdout_size,
        holdout_size,
        holdout_mae: mae,
        holdout_sign_accuracy: acc,
        features: model.features.dim(),
        solver_iterations: iterations,
    };
    Ok((model, report))
}
