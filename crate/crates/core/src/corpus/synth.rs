//! Synthetic two-sided news corpus with known ground-truth bias structure.
//!
//! Every word slot of a side's articles (headline and body) independently
//! draws one of that side's planted terms with probability `injection_rate`,
//! otherwise a neutral word from a Zipf-distributed background vocabulary
//! shared by both sides. Articles carry the label `-label_magnitude` (left)
//! or `+label_magnitude` (right).

use std::collections::HashSet;

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Article, ArticleSet, Side};
use crate::bias::BiasScore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub articles_per_side: usize,
    pub planted_left_terms: Vec<String>,
    pub planted_right_terms: Vec<String>,
    pub neutral_vocab_size: usize,
    /// Inclusive range of body sentences per article.
    pub sentences_per_article: (usize, usize),
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    pub injection_rate: f64,
    pub zipf_exponent: f64,
    pub label_magnitude: f64,
    pub rng_seed: u64,
}

impl SynthSpec {
    /// `planted_per_side` generated terms per side, 600 neutral words,
    /// 6–16 sentences of 6–14 words.
    pub fn standard(articles_per_side: usize, planted_per_side: usize, injection_rate: f64, rng_seed: u64) -> Self {
        Self {
            articles_per_side,
            planted_left_terms: (0..planted_per_side).map(|i| format!("lib{}", pseudo_word(i))).collect(),
            planted_right_terms: (0..planted_per_side).map(|i| format!("con{}", pseudo_word(i))).collect(),
            neutral_vocab_size: 600,
            sentences_per_article: (6, 16),
            words_per_sentence: (6, 14),
            injection_rate,
            zipf_exponent: 0.8,
            label_magnitude: 20.0,
            rng_seed,
        }
    }

    pub fn planted(&self, side: Side) -> &[String] {
        match side {
            Side::Left => &self.planted_left_terms,
            Side::Right => &self.planted_right_terms,
        }
    }

    /// Background words, in Zipf rank order.
    pub fn neutral_vocab(&self) -> Vec<String> {
        let planted: HashSet<&str> =
            self.planted_left_terms.iter().chain(&self.planted_right_terms).map(String::as_str).collect();
        (0..).map(pseudo_word).filter(|w| !planted.contains(w.as_str())).take(self.neutral_vocab_size).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(format!("invalid synth spec: {m}")));
        if self.neutral_vocab_size == 0 {
            return bad("neutral_vocab_size must be positive");
        }
        for (name, (lo, hi)) in
            [("sentences_per_article", self.sentences_per_article), ("words_per_sentence", self.words_per_sentence)]
        {
            if lo == 0 || lo > hi {
                return bad(&format!("{name} must be a non-empty positive range"));
            }
        }
        if !(0.0..=1.0).contains(&self.injection_rate) {
            return bad("injection_rate must lie in [0, 1]");
        }
        if self.injection_rate > 0.0 && (self.planted_left_terms.is_empty() || self.planted_right_terms.is_empty()) {
            return bad("planted term lists must be non-empty when injection_rate > 0");
        }
        let left: HashSet<&String> = self.planted_left_terms.iter().collect();
        if self.planted_right_terms.iter().any(|t| left.contains(t)) {
            return bad("planted term lists must be disjoint");
        }
        for t in self.planted_left_terms.iter().chain(&self.planted_right_terms) {
            if t.is_empty() || !t.chars().all(|c| c.is_alphanumeric()) || t.chars().any(char::is_uppercase) {
                return bad(&format!("planted term {t:?} must be a single lowercase alphanumeric token"));
            }
        }
        Ok(())
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "h", "k", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Deterministic pronounceable word for an index (two or more syllables).
fn pseudo_word(mut i: usize) -> String {
    let per = ONSETS.len() * VOWELS.len();
    let mut w = String::new();
    let mut syllables = 0;
    loop {
        let s = i % per;
        w.push_str(ONSETS[s / VOWELS.len()]);
        w.push_str(VOWELS[s % VOWELS.len()]);
        i /= per;
        syllables += 1;
        if i == 0 && syllables >= 2 {
            break;
        }
    }
    w
}

const LEFT_DOMAINS: &[&str] = &["CNN", "Vox", "Buzzfeed News", "New York Times", "Washington Post"];
const RIGHT_DOMAINS: &[&str] = &["Breitbart", "Fox News", "National Review", "New York Post"];
const FIRST_NAMES: &[&str] = &["Eugene", "Jack", "Maria", "Aisha", "Tom", "Hannah", "Luis", "Priya", "Sam", "Dana"];
const LAST_NAMES: &[&str] =
    &["Scott", "Montgomery", "Garcia", "Khan", "Miller", "Nguyen", "Fischer", "Okafor", "Rossi", "Berg"];

struct Generator<'a> {
    spec: &'a SynthSpec,
    neutral: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl<'a> Generator<'a> {
    fn word(&self, side: Side, rng: &mut ChaCha8Rng) -> &str {
        let planted = self.spec.planted(side);
        if !planted.is_empty() && rng.random_bool(self.spec.injection_rate) {
            &planted[rng.random_range(0..planted.len())]
        } else {
            &self.neutral[self.zipf.sample(rng)]
        }
    }

    fn words(&self, side: Side, n: usize, rng: &mut ChaCha8Rng) -> String {
        let mut s = String::new();
        for k in 0..n {
            let w = self.word(side, rng);
            if k == 0 {
                let mut cs = w.chars();
                if let Some(c) = cs.next() {
                    s.extend(c.to_uppercase());
                    s.push_str(cs.as_str());
                }
            } else {
                s.push(' ');
                s.push_str(w);
                if k + 1 < n && rng.random_bool(0.08) {
                    s.push(',');
                }
            }
        }
        s
    }

    fn article(&self, side: Side, idx: usize, rng: &mut ChaCha8Rng) -> Article {
        let (slo, shi) = self.spec.sentences_per_article;
        let (wlo, whi) = self.spec.words_per_sentence;
        let headline_len = rng.random_range(5..=10);
        let headline = self.words(side, headline_len, rng);
        let n_sent = rng.random_range(slo..=shi);
        let body = (0..n_sent)
            .map(|_| {
                let n = rng.random_range(wlo..=whi);
                let mut s = self.words(side, n, rng);
                s.push('.');
                s
            })
            .collect::<Vec<_>>()
            .join(" ");
        let domains = match side {
            Side::Left => LEFT_DOMAINS,
            Side::Right => RIGHT_DOMAINS,
        };
        let domain = domains[rng.random_range(0..domains.len())].to_string();
        let n_auth = rng.random_range(1..=2);
        let authors = (0..n_auth)
            .map(|_| {
                format!(
                    "{} {}",
                    FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())],
                    LAST_NAMES[rng.random_range(0..LAST_NAMES.len())]
                )
            })
            .collect();
        let base = NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date");
        let date = base + Duration::days(rng.random_range(0..540));
        let sign = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        Article {
            id: format!("{side}-{idx:05}"),
            headline,
            domain,
            authors,
            date: Some(date),
            body,
            bias: Some(BiasScore::new(sign * self.spec.label_magnitude)),
        }
    }
}

/// Builds the left and right sets described by `spec`; deterministic in
/// `spec.rng_seed`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<(ArticleSet, ArticleSet)> {
    spec.validate()?;
    let neutral = spec.neutral_vocab();
    let weights: Vec<f64> = (1..=neutral.len()).map(|r| (r as f64).powf(-spec.zipf_exponent)).collect();
    let zipf = WeightedIndex::new(&weights).map_err(|e| Error::Argument(format!("zipf weights: {e}")))?;
    let gen = Generator { spec, neutral, zipf };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut sets = Side::BOTH.iter().map(|&side| {
        let articles = (0..spec.articles_per_side).map(|i| gen.article(side, i, &mut rng)).collect();
        ArticleSet::new(articles, Some(side))
    });
    let left = sets.next().expect("two sides")?;
    let right = sets.next().expect("two sides")?;
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::word_tokens;

    #[test]
    fn zero_articles_gives_empty_sets() {
        let (l, r) = synth_corpus(&SynthSpec::standard(0, 5, 0.2, 1)).unwrap();
        assert!(l.is_empty() && r.is_empty());
        assert_eq!((l.label(), r.label()), (Some(Side::Left), Some(Side::Right)));
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec::standard(20, 5, 0.2, 7);
        assert_eq!(synth_corpus(&spec).unwrap(), synth_corpus(&spec).unwrap());
        let other = SynthSpec { rng_seed: 8, ..spec.clone() };
        assert_ne!(synth_corpus(&spec).unwrap().0, synth_corpus(&other).unwrap().0);
    }

    #[test]
    fn planted_frequency_matches_injection_rate() {
        let spec = SynthSpec::standard(500, 50, 0.2, 7);
        let (left, right) = synth_corpus(&spec).unwrap();
        for (set, side) in [(&left, Side::Left), (&right, Side::Right)] {
            let own: HashSet<&str> = spec.planted(side).iter().map(String::as_str).collect();
            let other: HashSet<&str> = spec.planted(side.opposite()).iter().map(String::as_str).collect();
            let (mut words, mut planted) = (0usize, 0usize);
            for a in set {
                for t in word_tokens(&a.headline).into_iter().chain(word_tokens(&a.body)) {
                    if t.chars().all(char::is_alphanumeric) {
                        words += 1;
                        planted += own.contains(t.as_str()) as usize;
                        assert!(!other.contains(t.as_str()));
                    }
                }
            }
            let expected = 0.2 * words as f64;
            let rel = (planted as f64 - expected).abs() / expected;
            assert!(rel < 0.2, "{side}: planted {planted} vs expected {expected}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = SynthSpec::standard(1, 2, 0.2, 0);
        s.planted_right_terms = s.planted_left_terms.clone();
        assert!(s.validate().is_err());
        let mut s = SynthSpec::standard(1, 2, 0.2, 0);
        s.sentences_per_article = (3, 2);
        assert!(s.validate().is_err());
        let mut s = SynthSpec::standard(1, 0, 0.2, 0);
        s.neutral_vocab_size = 10;
        assert!(s.validate().is_err());
    }

    #[test]
    fn neutral_vocab_disjoint_from_planted() {
        let spec = SynthSpec::standard(1, 50, 0.2, 0);
        let n = spec.neutral_vocab();
        assert_eq!(n.len(), 600);
        let set: HashSet<_> = n.iter().collect();
        assert_eq!(set.len(), 600);
        assert!(spec.planted_left_terms.iter().all(|t| !set.contains(t)));
    }
}
