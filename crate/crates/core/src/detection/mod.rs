//! Machine-text detectors, score fusion and equal-error-rate evaluation.
//!
//! Every detector is oriented so that a higher value means "more likely
//! machine-generated":
//! - `A`: GLTR top-10 fraction under a reference language model.
//! - `B`: mean per-token log-probability (negative log-perplexity).
//! - `C`: a trained discriminative classifier's probability of machine.

mod eer;
mod fusion;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SparseVec, TfIdf};
use crate::io::derive_seed;
use crate::linear::{logistic, sigmoid};
use crate::lm::LanguageModel;
use crate::tokenizer::{tokenize, TokenId};

pub use eer::eer;
pub use fusion::{FusionModel, DEFAULT_FUSION_L2};

pub const MIN_TOKENS: usize = 5;
pub const RANK_BUCKETS: [usize; 3] = [10, 100, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    pub detector: String,
    pub value: f64,
}

fn checked_tokens(lm: &LanguageModel, text: &str, min_tokens: usize) -> Result<Vec<TokenId>> {
    let toks = tokenize(text, &lm.vocab);
    if toks.is_empty() || toks.len() < min_tokens {
        return Err(Error::Argument(format!(
            "text has {} tokens; at least {} required",
            toks.len(),
            min_tokens.max(1)
        )));
    }
    Ok(toks)
}

/// Position of `token` in the next-token distribution sorted by probability
/// descending, ties broken by lower id first. Zero-based.
pub fn token_rank(dist: &[f64], token: TokenId) -> usize {
    let p = dist[token as usize];
    dist.iter().enumerate().filter(|&(v, &q)| q > p || (q == p && (v as TokenId) < token)).count()
}

/// Fractions of tokens ranked within the top 10, top 100, top 1000, and
/// beyond. Texts with fewer than `min_tokens` tokens are rejected.
pub fn gltr_features(lm: &LanguageModel, text: &str, min_tokens: usize) -> Result<[f64; 4]> {
    let toks = checked_tokens(lm, text, min_tokens)?;
    let mut counts = [0usize; 4];
    for t in 0..toks.len() {
        let rank = token_rank(&lm.model.next_token_dist(&toks[..t]), toks[t]);
        let bucket = RANK_BUCKETS.iter().position(|&b| rank < b).unwrap_or(3);
        counts[bucket] += 1;
    }
    let n = toks.len() as f64;
    Ok(counts.map(|c| c as f64 / n))
}

/// Mean natural-log probability per token, i.e. −ln(perplexity).
pub fn ppl_detector(lm: &LanguageModel, text: &str) -> Result<DetectorScore> {
    let toks = checked_tokens(lm, text, 1)?;
    let value = lm.model.sequence_logprob(&toks) / toks.len() as f64;
    Ok(DetectorScore { detector: "B".into(), value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeOptions {
    pub min_df: usize,
    pub l2: f64,
    pub min_tokens: usize,
}

impl Default for DiscriminativeOptions {
    fn default() -> Self {
        Self { min_df: 2, l2: 1e-3, min_tokens: MIN_TOKENS }
    }
}

/// Logistic regression on TF-IDF terms plus the four GLTR fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeDetector {
    tfidf: TfIdf,
    weights: Vec<f64>,
    intercept: f64,
    min_tokens: usize,
}

fn joint_features(tfidf: &TfIdf, text: &str, gltr: &[f64; 4]) -> SparseVec {
    let mut v = tfidf.transform(text);
    let base = tfidf.dim() as u32;
    v.extend(gltr.iter().enumerate().map(|(i, &g)| (base + i as u32, g)));
    v
}

impl DiscriminativeDetector {
    fn fit(texts: &[&str], gltr: &[[f64; 4]], is_machine: &[bool], opts: &DiscriminativeOptions) -> Result<Self> {
        let tfidf = TfIdf::fit(texts.iter().copied(), opts.min_df)?;
        let rows: Vec<SparseVec> = texts.iter().zip(gltr).map(|(t, g)| joint_features(&tfidf, t, g)).collect();
        let fit = logistic(&rows, tfidf.dim() + 4, is_machine, opts.l2)?;
        Ok(Self { tfidf, weights: fit.weights, intercept: fit.intercept, min_tokens: opts.min_tokens })
    }

    fn prob(&self, text: &str, gltr: &[f64; 4]) -> f64 {
        let v = joint_features(&self.tfidf, text, gltr);
        sigmoid(v.iter().map(|&(i, x)| x * self.weights[i as usize]).sum::<f64>() + self.intercept)
    }

    /// Probability that `text` is machine-generated.
    pub fn score(&self, lm: &LanguageModel, text: &str) -> Result<DetectorScore> {
        let g = gltr_features(lm, text, self.min_tokens)?;
        Ok(DetectorScore { detector: "C".into(), value: self.prob(text, &g) })
    }
}

fn gltr_all(lm: &LanguageModel, texts: &[&str], min_tokens: usize) -> Result<Vec<[f64; 4]>> {
    texts.par_iter().map(|t| gltr_features(lm, t, min_tokens)).collect()
}

/// Fits the discriminative detector. `lm` is the reference model for the
/// GLTR features.
pub fn train_discriminative(
    lm: &LanguageModel,
    human: &[&str],
    machine: &[&str],
    opts: &DiscriminativeOptions,
) -> Result<DiscriminativeDetector> {
    if human.is_empty() || machine.is_empty() {
        return Err(Error::Argument("discriminative training needs both human and machine texts".into()));
    }
    let texts: Vec<&str> = human.iter().chain(machine).copied().collect();
    let labels: Vec<bool> = (0..texts.len()).map(|i| i >= human.len()).collect();
    let gltr = gltr_all(lm, &texts, opts.min_tokens)?;
    DiscriminativeDetector::fit(&texts, &gltr, &labels, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub rng_seed: u64,
    pub train_fraction: f64,
    /// Folds used to produce out-of-fold classifier scores for fusion training.
    pub folds: usize,
    pub discriminative: DiscriminativeOptions,
    pub fusion_l2: f64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            train_fraction: 0.7,
            folds: 5,
            discriminative: DiscriminativeOptions::default(),
            fusion_l2: DEFAULT_FUSION_L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineText {
    pub generator: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    /// Detector combination such as `A+C`.
    pub detectors: String,
    /// One EER per generator, in the report's generator order.
    pub by_generator: Vec<Option<f64>>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub generators: Vec<String>,
    pub rows: Vec<DetectionRow>,
    pub train_human: usize,
    pub train_machine: usize,
    pub test_human: usize,
    pub test_machine: usize,
    pub skipped_short: usize,
}

impl DetectionReport {
    pub fn row(&self, detectors: &str) -> Option<&DetectionRow> {
        self.rows.iter().find(|r| r.detectors == detectors)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("detectors");
        for g in &self.generators {
            out.push('\t');
            out.push_str(g);
        }
        out.push_str("\toverall\n");
        for r in &self.rows {
            out.push_str(&r.detectors);
            for e in &r.by_generator {
                match e {
                    Some(v) => out.push_str(&format!("\t{v:.4}")),
                    None => out.push_str("\t-"),
                }
            }
            out.push_str(&format!("\t{:.4}\n", r.overall));
        }
        out
    }
}

pub const COMBINATIONS: [&[usize]; 7] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
const NAMES: [&str; 3] = ["A", "B", "C"];

/// Seeded split of `0..n` into (train, test) index lists, both ascending.
fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let test_n = ((n as f64) * (1.0 - train_fraction)).round() as usize;
    let mut is_test = vec![false; n];
    for i in index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, test_n.min(n)) {
        is_test[i] = true;
    }
    (0..n).partition(|&i| !is_test[i])
}

/// Trains and evaluates detectors A, B, C and every fusion of them.
///
/// Human and machine texts are split into train and held-out parts
/// separately. Fusion models are trained on train-part scores where the
/// classifier's scores come from cross-fitting, so its in-sample fit does
/// not leak into the fusion weights. Texts below the minimum token count
/// are skipped and counted.
pub fn detection_benchmark(
    lm: &LanguageModel,
    human: &[String],
    machine: &[MachineText],
    opts: &BenchmarkOptions,
) -> Result<DetectionReport> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(Error::Argument(format!("train fraction must be in (0, 1), got {}", opts.train_fraction)));
    }
    if opts.folds < 2 {
        return Err(Error::Argument("cross-fitting needs at least two folds".into()));
    }
    let min = opts.discriminative.min_tokens.max(1);
    let long_enough = |t: &str| tokenize(t, &lm.vocab).len() >= min;
    let mut texts: Vec<&str> = Vec::new();
    let mut group: Vec<Option<usize>> = Vec::new();
    let mut generators: Vec<String> = Vec::new();
    let mut skipped = 0;
    for h in human {
        if long_enough(h) {
            texts.push(h);
            group.push(None);
        } else {
            skipped += 1;
        }
    }
    for m in machine {
        if !long_enough(&m.text) {
            skipped += 1;
            continue;
        }
        let g = match generators.iter().position(|g| *g == m.generator) {
            Some(g) => g,
            None => {
                generators.push(m.generator.clone());
                generators.len() - 1
            }
        };
        texts.push(&m.text);
        group.push(Some(g));
    }
    let is_machine: Vec<bool> = group.iter().map(|g| g.is_some()).collect();
    if !is_machine.iter().any(|&m| m) || is_machine.iter().all(|&m| m) {
        return Err(Error::Argument("benchmark needs usable human and machine texts".into()));
    }

    let gltr = gltr_all(lm, &texts, min)?;
    let ppl: Vec<f64> = texts.par_iter().map(|t| ppl_detector(lm, t).map(|s| s.value)).collect::<Result<_>>()?;

    // stratified split: humans, then each generator
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut strata: Vec<Option<usize>> = vec![None];
    strata.extend((0..generators.len()).map(Some));
    for (k, s) in strata.iter().enumerate() {
        let members: Vec<usize> = (0..texts.len()).filter(|&i| group[i] == *s).collect();
        let (tr, te) = split_indices(members.len(), opts.train_fraction, derive_seed(opts.rng_seed, &[k as u64]));
        train.extend(tr.into_iter().map(|i| members[i]));
        test.extend(te.into_iter().map(|i| members[i]));
    }
    train.sort_unstable();
    test.sort_unstable();
    let count = |idx: &[usize], m: bool| idx.iter().filter(|&&i| is_machine[i] == m).count();
    if count(&train, true) == 0 || count(&train, false) == 0 || count(&test, true) == 0 || count(&test, false) == 0 {
        return Err(Error::Argument("too few texts for a train/held-out split of both classes".into()));
    }

    let fit_on = |idx: &[usize]| {
        let t: Vec<&str> = idx.iter().map(|&i| texts[i]).collect();
        let g: Vec<[f64; 4]> = idx.iter().map(|&i| gltr[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| is_machine[i]).collect();
        DiscriminativeDetector::fit(&t, &g, &l, &opts.discriminative)
    };

    // out-of-fold classifier scores on the train part
    let perm = index::sample(
        &mut ChaCha8Rng::seed_from_u64(derive_seed(opts.rng_seed, &[u64::MAX])),
        train.len(),
        train.len(),
    );
    let fold_order: Vec<usize> = perm.into_iter().map(|i| train[i]).collect();
    let mut c_score = vec![0.0; texts.len()];
    let fold_scores: Vec<Vec<(usize, f64)>> = (0..opts.folds)
        .into_par_iter()
        .map(|f| {
            let (held, rest): (Vec<usize>, Vec<usize>) = (0..fold_order.len()).partition(|k| k % opts.folds == f);
            let held: Vec<usize> = held.into_iter().map(|k| fold_order[k]).collect();
            let rest: Vec<usize> = rest.into_iter().map(|k| fold_order[k]).collect();
            let det = fit_on(&rest)?;
            Ok(held.into_iter().map(|i| (i, det.prob(texts[i], &gltr[i]))).collect())
        })
        .collect::<Result<_>>()?;
    for (i, s) in fold_scores.into_iter().flatten() {
        c_score[i] = s;
    }
    let full = fit_on(&train)?;
    for &i in &test {
        c_score[i] = full.prob(texts[i], &gltr[i]);
    }

    let scores = |i: usize| [gltr[i][0], ppl[i], c_score[i]];
    let label = |idx: &[usize]| idx.iter().map(|&i| is_machine[i]).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for combo in COMBINATIONS {
        let name = combo.iter().map(|&j| NAMES[j]).collect::<Vec<_>>().join("+");
        let test_scores: Vec<f64> = if combo.len() == 1 {
            test.iter().map(|&i| scores(i)[combo[0]]).collect()
        } else {
            let ids: Vec<String> = combo.iter().map(|&j| NAMES[j].to_string()).collect();
            let pick = |i: usize| combo.iter().map(|&j| scores(i)[j]).collect::<Vec<f64>>();
            let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| pick(i)).collect();
            let fm = FusionModel::train(&ids, &train_rows, &label(&train), opts.fusion_l2)?;
            test.iter().map(|&i| fm.apply(&ids, &pick(i))).collect::<Result<_>>()?
        };
        let overall = eer(&test_scores, &label(&test))?;
        let by_generator = (0..generators.len())
            .map(|g| {
                let (s, l): (Vec<f64>, Vec<bool>) = test
                    .iter()
                    .zip(&test_scores)
                    .filter(|(&i, _)| group[i].is_none() || group[i] == Some(g))
                    .map(|(&i, &s)| (s, is_machine[i]))
                    .unzip();
                eer(&s, &l).ok()
            })
            .collect();
        rows.push(DetectionRow { detectors: name, by_generator, overall });
    }
    Ok(DetectionReport {
        generators,
        rows,
        train_human: count(&train, false),
        train_machine: count(&train, true),
        test_human: count(&test, false),
        test_machine: count(&test, true),
        skipped_short: skipped,
    })
}
