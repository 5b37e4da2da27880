//! Discriminativeness ratio between two corpora.
//!
//! `ratio(w) = f_t(w) / f_r(w)` with additively smoothed relative
//! frequencies `f(w) = (count(w) + alpha) / (N + alpha·|V|)`, where `N` is
//! the corpus token count and `V` the union vocabulary of both corpora.
//! Headline and body tokens are both counted.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::ArticleSet;
use crate::error::{Error, Result};
use crate::tokenizer::word_tokens;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_RATIO_MIN_COUNT: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub word: String,
    pub ratio: f64,
    pub count_target: u64,
    pub count_reference: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    /// Sorted by ratio descending, then word.
    pub entries: Vec<RatioEntry>,
    pub alpha: f64,
    pub min_count: u64,
    pub target_tokens: u64,
    pub reference_tokens: u64,
    pub vocab_size: usize,
}

impl RatioTable {
    pub fn get(&self, word: &str) -> Option<&RatioEntry> {
        self.entries.iter().find(|e| e.word == word)
    }

    pub fn as_map(&self) -> HashMap<&str, f64> {
        self.entries.iter().map(|e| (e.word.as_str(), e.ratio)).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tratio\tcount_target\tcount_reference\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.word, e.ratio, e.count_target, e.count_reference));
        }
        out
    }
}

fn count_tokens(set: &ArticleSet) -> (BTreeMap<String, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut n = 0;
    for a in set {
        for text in [&a.headline, &a.body] {
            for t in word_tokens(text) {
                *counts.entry(t).or_default() += 1;
                n += 1;
            }
        }
    }
    (counts, n)
}

/// Ratio of every word whose combined count reaches `min_count`, `target`
/// over `reference`.
pub fn discriminativeness_ratio(
    target: &ArticleSet,
    reference: &ArticleSet,
    min_count: u64,
    alpha: f64,
) -> Result<RatioTable> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Argument(format!("smoothing alpha must be positive, got {alpha}")));
    }
    let (ct, nt) = count_tokens(target);
    let (cr, nr) = count_tokens(reference);
    if nt == 0 || nr == 0 {
        return Err(Error::Empty("both corpora need at least one token".into()));
    }
    let mut vocab: Vec<&String> = ct.keys().chain(cr.keys()).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let v = vocab.len() as f64;
    let denom_t = nt as f64 + alpha * v;
    let denom_r = nr as f64 + alpha * v;
    let mut entries: Vec<RatioEntry> = vocab
        .into_iter()
        .filter_map(|w| {
            let (a, b) = (ct.get(w).copied().unwrap_or(0), cr.get(w).copied().unwrap_or(0));
            (a + b >= min_count).then(|| RatioEntry {
                word: w.clone(),
                ratio: ((a as f64 + alpha) / denom_t) / ((b as f64 + alpha) / denom_r),
                count_target: a,
                count_reference: b,
            })
        })
        .collect();
    entries.sort_by(|x, y| y.ratio.total_cmp(&x.ratio).then_with(|| x.word.cmp(&y.word)));
    Ok(RatioTable { entries, alpha, min_count, target_tokens: nt, reference_tokens: nr, vocab_size: v as usize })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use proptest::prelude::*;

    fn set(bodies: &[&str]) -> ArticleSet {
        let arts = bodies
            .iter()
            .enumerate()
            .map(|(i, b)| Article {
                id: i.to_string(),
                headline: String::new(),
                domain: String::new(),
                authors: vec![],
                date: None,
                body: (*b).into(),
                bias: None,
            })
            .collect();
        ArticleSet::new(arts, None).unwrap()
    }

    #[test]
    fn hand_computed_example() {
        let t = discriminativeness_ratio(&set(&["good good good bad"]), &set(&["good bad bad bad"]), 1, 1.0).unwrap();
        assert_eq!(t.get("good").unwrap().ratio, 2.0);
        assert_eq!(t.get("bad").unwrap().ratio, 0.5);
        assert_eq!(t.entries[0].word, "good");
        assert_eq!(t.to_tsv().lines().nth(1), Some("good\t2\t3\t1"));
    }

    #[test]
    fn identical_corpora_give_unit_ratios() {
        let s = set(&["the senate voted", "the house voted twice"]);
        let t = discriminativeness_ratio(&s, &s, 1, 1.0).unwrap();
        assert!(t.entries.iter().all(|e| e.ratio == 1.0));
    }

    #[test]
    fn min_count_and_errors() {
        let t = discriminativeness_ratio(&set(&["a a b"]), &set(&["a c"]), 3, 1.0).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert!(discriminativeness_ratio(&set(&[""]), &set(&["a"]), 1, 1.0).is_err());
        assert!(discriminativeness_ratio(&ArticleSet::default(), &set(&["a"]), 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn swapped_corpora_are_reciprocal(a in "[a-e ]{1,60}", b in "[a-e ]{1,60}", alpha in 0.1f64..3.0) {
            prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
            let (sa, sb) = (set(&[a.as_str()]), set(&[b.as_str()]));
            let ab = discriminativeness_ratio(&sa, &sb, 1, alpha).unwrap();
            let ba_table = discriminativeness_ratio(&sb, &sa, 1, alpha).unwrap();
            let ba = ba_table.as_map();
            for e in &ab.entries {
                prop_assert!((e.ratio * ba[e.word.as_str()] - 1.0).abs() < 1e-12);
            }
        }
    }
}
