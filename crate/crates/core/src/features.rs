//! TF-IDF over word unigrams and bigrams with sparse, L2-normalized rows.
//!
//! Document frequencies are counted over distinct document texts, so
//! repeating documents in a training set does not change the feature space.
//! `idf(t) = ln(N / df(t)) + 1` with `N` the number of distinct documents.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::word_tokens;

/// Sparse vector as `(feature index, value)` pairs sorted by index.
pub type SparseVec = Vec<(u32, f64)>;

pub fn sparse_dot(a: &SparseVec, dense: &[f64]) -> f64 {
    a.iter().map(|&(i, v)| v * dense[i as usize]).sum()
}

/// Unigram and bigram terms of a text.
pub fn terms(text: &str) -> Vec<String> {
    let toks = word_tokens(text);
    let mut out = toks.clone();
    out.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdf {
    /// Feature names in index order (lexicographic).
    names: Vec<String>,
    idf: Vec<f64>,
    min_df: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl TfIdf {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>, min_df: usize) -> Result<Self> {
        let unique: HashSet<&str> = docs.into_iter().collect();
        if unique.is_empty() {
            return Err(Error::Empty("no documents to fit TF-IDF on".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in &unique {
            let distinct: HashSet<String> = terms(doc).into_iter().collect();
            for t in distinct {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = unique.len() as f64;
        let (names, idf): (Vec<String>, Vec<f64>) =
            df.into_iter().filter(|&(_, d)| d >= min_df.max(1)).map(|(t, d)| (t, (n / d as f64).ln() + 1.0)).unzip();
        Ok(Self::with_index(names, idf, min_df))
    }

    fn with_index(names: Vec<String>, idf: Vec<f64>, min_df: usize) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        Self { names, idf, min_df, index }
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(self) -> Self {
        Self::with_index(self.names, self.idf, self.min_df)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn transform(&self, text: &str) -> SparseVec {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in terms(text) {
            if let Some(&i) = self.index.get(&t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = tf.into_iter().map(|(i, c)| (i, c * self.idf[i as usize])).collect();
        let norm = v.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unigrams_and_bigrams() {
        assert_eq!(terms("Big cat, sat"), ["big", "cat", ",", "sat", "big cat", "cat ,", ", sat"]);
    }

    #[test]
    fn rows_are_unit_norm_and_df_floor_applies() {
        let docs = ["red apple pie", "green apple", "red car"];
        let tf = TfIdf::fit(docs, 2).unwrap();
        assert_eq!(tf.names, ["apple", "red"]);
        let v = tf.transform("red red apple");
        let norm: f64 = v.iter().map(|&(_, x)| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(tf.transform("blue").is_empty());
    }

    #[test]
    fn duplicated_documents_do_not_change_features() {
        let docs = ["a b c", "a b", "c d e", "a e"];
        let doubled: Vec<&str> = docs.iter().chain(docs.iter()).copied().collect();
        assert_eq!(TfIdf::fit(docs, 2).unwrap(), TfIdf::fit(doubled, 2).unwrap());
    }

    #[test]
    fn serde_roundtrip_needs_reindex() {
        let tf = TfIdf::fit(["a b", "b c"], 1).unwrap();
        let back: TfIdf = serde_json::from_str::<TfIdf>(&serde_json::to_string(&tf).unwrap()).unwrap().reindex();
        assert_eq!(back.transform("a b c"), tf.transform("a b c"));
    }
}
