//! Interpolated Kneser–Ney n-gram language model.
//!
//! For a model of order `n` and discount `d`, the order-`k` estimate of a
//! word `w` after a context `h` of `k - 1` tokens is
//!
//! ```text
//! P_k(w | h) = max(c_k(h w) - d, 0) / c_k(h ·)  +  d · N(h ·) / c_k(h ·) · P_{k-1}(w | h')
//! ```
//!
//! where `h'` drops the oldest token of `h`, `N(h ·)` is the number of
//! distinct words seen after `h`, and `c_k` is the raw count for the highest
//! order and the continuation count (number of distinct left neighbours)
//! below it. When `h` was never seen the estimate is `P_{k-1}(w | h')`.
//! The unigram level interpolates with the uniform distribution over the
//! vocabulary, so every token has non-zero probability.
//!
//! Sequences are not padded: a query with a context shorter than `n - 1`
//! tokens starts at order `len(context) + 1`.

mod sampling;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Side};
use crate::error::{Error, Result};
use crate::io;
use crate::tokenizer::{encode_article, encode_document, TokenId, Vocab};

pub use sampling::{decode_field, generate_conditional, sample, FieldDecode, SamplingParams, GREEDY_TEMPERATURE};

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_DISCOUNT: f64 = 0.75;
pub const MAX_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
struct ContextStats {
    total: u64,
    /// `(word, count)` sorted by word id; every count is positive.
    followers: Vec<(TokenId, u64)>,
}

impl ContextStats {
    fn count(&self, w: TokenId) -> u64 {
        self.followers.binary_search_by_key(&w, |&(t, _)| t).map_or(0, |i| self.followers[i].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    support: usize,
    vocab_fingerprint: Option<String>,
    side: Option<Side>,
    /// `levels[k - 1]` maps contexts of `k - 1` tokens to follower counts.
    levels: Vec<HashMap<Vec<TokenId>, ContextStats>>,
    unigram: Vec<f64>,
    seen: Vec<bool>,
}

impl NGramModel {
    /// Counts `seqs` and builds the model. `support` is the vocabulary size;
    /// every id must be below it.
    pub fn train(seqs: &[Vec<TokenId>], support: usize, order: usize, discount: f64) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Argument(format!("order must be in 1..={MAX_ORDER}, got {order}")));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::Argument(format!("discount must be in (0, 1), got {discount}")));
        }
        if seqs.iter().all(Vec::is_empty) {
            return Err(Error::Empty("cannot train a language model on an empty corpus".into()));
        }
        if let Some(&bad) = seqs.iter().flatten().find(|&&t| t as usize >= support) {
            return Err(Error::Argument(format!("token id {bad} outside vocabulary of size {support}")));
        }

        // raw counts of full-order n-grams
        let mut raw: HashMap<&[TokenId], u64> = HashMap::new();
        // distinct m-grams for 2 <= m <= order, feeding continuation counts
        let mut distinct: Vec<std::collections::HashSet<&[TokenId]>> = vec![Default::default(); order + 1];
        for seq in seqs {
            for end in 1..=seq.len() {
                if end >= order {
                    *raw.entry(&seq[end - order..end]).or_default() += 1;
                }
                for m in 2..=order.min(end) {
                    distinct[m].insert(&seq[end - m..end]);
                }
            }
        }

        let mut levels: Vec<HashMap<Vec<TokenId>, ContextStats>> = vec![HashMap::new(); order];
        let mut add = |gram: &[TokenId], count: u64| {
            let k = gram.len();
            let stats = levels[k - 1].entry(gram[..k - 1].to_vec()).or_default();
            stats.total += count;
            stats.followers.push((gram[k - 1], count));
        };
        for (gram, c) in raw {
            add(gram, c);
        }
        // continuation count of a k-gram = number of distinct (k+1)-grams ending in it
        let mut cont: HashMap<&[TokenId], u64> = HashMap::new();
        for set in &distinct[2..] {
            for g in set {
                *cont.entry(&g[1..]).or_default() += 1;
            }
        }
        for (gram, c) in cont {
            add(gram, c);
        }
        for level in &mut levels {
            for stats in level.values_mut() {
                stats.followers.sort_unstable_by_key(|&(t, _)| t);
            }
        }
        Ok(Self::from_parts(order, discount, support, levels))
    }

    fn from_parts(
        order: usize,
        discount: f64,
        support: usize,
        levels: Vec<HashMap<Vec<TokenId>, ContextStats>>,
    ) -> Self {
        let mut m = Self {
            order,
            discount,
            support,
            vocab_fingerprint: None,
            side: None,
            levels,
            unigram: Vec::new(),
            seen: Vec::new(),
        };
        m.unigram = m.compute_unigram();
        m.seen = m.compute_seen();
        m
    }

    /// Uniform distribution over `support` tokens.
    pub fn uniform(support: usize) -> Self {
        Self::from_parts(1, DEFAULT_DISCOUNT, support.max(1), vec![HashMap::new()])
    }

    fn compute_seen(&self) -> Vec<bool> {
        let mut seen = vec![false; self.support];
        for level in &self.levels {
            for (ctx, stats) in level {
                for &t in ctx.iter().chain(stats.followers.iter().map(|(t, _)| t)) {
                    seen[t as usize] = true;
                }
            }
        }
        seen
    }

    fn compute_unigram(&self) -> Vec<f64> {
        let floor = 1.0 / self.support as f64;
        let Some(stats) = self.levels[0].get(&[][..]).filter(|s| s.total > 0) else {
            return vec![floor; self.support];
        };
        let total = stats.total as f64;
        let backoff = self.discount * stats.followers.len() as f64 / total;
        let mut p = vec![backoff * floor; self.support];
        for &(w, c) in &stats.followers {
            p[w as usize] += (c as f64 - self.discount).max(0.0) / total;
        }
        p
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Number of tokens the distribution ranges over.
    pub fn support(&self) -> usize {
        self.support
    }

    pub fn side(&self) -> Option<Side> {
        self.side
    }

    pub fn with_side(mut self, side: Option<Side>) -> Self {
        self.side = side;
        self
    }

    pub fn vocab_fingerprint(&self) -> Option<&str> {
        self.vocab_fingerprint.as_deref()
    }

    pub fn bind_vocab(mut self, vocab: &Vocab) -> Self {
        self.vocab_fingerprint = Some(vocab.fingerprint().to_string());
        self
    }

    /// Fails unless the model was trained against `vocab` (unbound models
    /// accept any vocabulary of matching size).
    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        match &self.vocab_fingerprint {
            Some(fp) if fp != vocab.fingerprint() => {
                Err(Error::Contract(format!("model was trained with vocabulary {fp}, got {}", vocab.fingerprint())))
            }
            None if vocab.len() != self.support => Err(Error::Contract(format!(
                "model support {} does not match vocabulary size {}",
                self.support,
                vocab.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Whether `token` occurred anywhere in the training data.
    pub fn has_seen(&self, token: TokenId) -> bool {
        self.seen.get(token as usize).copied().unwrap_or(false)
    }

    /// Context actually used for a query: the last `order - 1` tokens.
    fn effective_context<'a>(&self, context: &'a [TokenId]) -> &'a [TokenId] {
        &context[context.len().saturating_sub(self.order - 1)..]
    }

    /// `P(word | context)`.
    pub fn prob(&self, context: &[TokenId], word: TokenId) -> f64 {
        let h = self.effective_context(context);
        if word as usize >= self.support {
            return 0.0;
        }
        let mut p = self.unigram[word as usize];
        for k in 2..=h.len() + 1 {
            let ctx = &h[h.len() - (k - 1)..];
            if let Some(stats) = self.levels[k - 1].get(ctx).filter(|s| s.total > 0) {
                let total = stats.total as f64;
                let gamma = self.discount * stats.followers.len() as f64 / total;
                p = (stats.count(word) as f64 - self.discount).max(0.0) / total + gamma * p;
            }
        }
        p
    }

    /// Full next-token distribution after `context`, indexed by token id.
    pub fn next_token_dist(&self, context: &[TokenId]) -> Vec<f64> {
        let h = self.effective_context(context);
        let mut p = self.unigram.clone();
        for k in 2..=h.len() + 1 {
            let ctx = &h[h.len() - (k - 1)..];
            if let Some(stats) = self.levels[k - 1].get(ctx).filter(|s| s.total > 0) {
                let total = stats.total as f64;
                let gamma = self.discount * stats.followers.len() as f64 / total;
                for v in p.iter_mut() {
                    *v *= gamma;
                }
                for &(w, c) in &stats.followers {
                    p[w as usize] += (c as f64 - self.discount).max(0.0) / total;
                }
            }
        }
        p
    }

    /// Natural-log probability of `seq`, each token conditioned on the
    /// tokens before it.
    pub fn sequence_logprob(&self, seq: &[TokenId]) -> f64 {
        (0..seq.len()).map(|t| self.prob(&seq[..t], seq[t]).ln()).sum()
    }

    /// `exp(-(Σ log P) / (Σ tokens))` over a corpus of sequences.
    pub fn perplexity(&self, corpus: &[Vec<TokenId>]) -> Result<f64> {
        let tokens: usize = corpus.iter().map(Vec::len).sum();
        if tokens == 0 {
            return Err(Error::Empty("perplexity needs at least one token".into()));
        }
        let lp: f64 = corpus.iter().map(|s| self.sequence_logprob(s)).sum();
        Ok((-lp / tokens as f64).exp())
    }

    fn to_dump(&self) -> ModelDump {
        let levels = self
            .levels
            .iter()
            .map(|level| {
                let mut entries: Vec<LevelEntry> = level
                    .iter()
                    .map(|(ctx, s)| LevelEntry { context: ctx.clone(), followers: s.followers.clone() })
                    .collect();
                entries.sort_by(|a, b| a.context.cmp(&b.context));
                entries
            })
            .collect();
        ModelDump {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            order: self.order,
            discount: self.discount,
            support: self.support,
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            side: self.side,
            levels,
        }
    }

    fn from_dump(d: ModelDump) -> Result<Self> {
        if d.format != MODEL_FORMAT || d.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model format {} v{}", d.format, d.version)));
        }
        if d.levels.len() != d.order || !(1..=MAX_ORDER).contains(&d.order) || d.support == 0 {
            return Err(Error::Format("inconsistent model header".into()));
        }
        let mut levels = Vec::with_capacity(d.order);
        for (k, entries) in d.levels.into_iter().enumerate() {
            let mut level = HashMap::with_capacity(entries.len());
            for e in entries {
                if e.context.len() != k || e.followers.iter().any(|&(w, c)| c == 0 || w as usize >= d.support) {
                    return Err(Error::Format(format!("malformed level-{} entry", k + 1)));
                }
                let total = e.followers.iter().map(|&(_, c)| c).sum();
                level.insert(e.context, ContextStats { total, followers: e.followers });
            }
            levels.push(level);
        }
        let mut m = Self::from_parts(d.order, d.discount, d.support, levels);
        m.vocab_fingerprint = d.vocab_fingerprint;
        m.side = d.side;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_dump())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_dump(serde_json::from_str(s)?)
    }
}

const MODEL_FORMAT: &str = "newsbias-ngram";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LevelEntry {
    context: Vec<TokenId>,
    followers: Vec<(TokenId, u64)>,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    format: String,
    version: u32,
    order: usize,
    discount: f64,
    support: usize,
    vocab_fingerprint: Option<String>,
    side: Option<Side>,
    levels: Vec<Vec<LevelEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub order: usize,
    pub discount: f64,
    /// Train on field-encoded articles (for conditional generation) instead
    /// of bodies terminated by `<eod>`.
    pub fielded: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, discount: DEFAULT_DISCOUNT, fielded: false }
    }
}

/// A model together with the vocabulary it was trained against.
#[derive(Debug, Clone)]
pub struct LanguageModel {
    pub vocab: Vocab,
    pub model: NGramModel,
    pub fielded: bool,
}

impl LanguageModel {
    pub fn train<'a>(
        articles: impl IntoIterator<Item = &'a Article>,
        vocab: Vocab,
        opts: TrainOptions,
        side: Option<Side>,
    ) -> Result<Self> {
        let seqs = training_sequences(articles, &vocab, opts.fielded);
        let model =
            NGramModel::train(&seqs, vocab.len(), opts.order, opts.discount)?.bind_vocab(&vocab).with_side(side);
        Ok(Self { vocab, model, fielded: opts.fielded })
    }

    /// Sequences in the same encoding the model was trained on.
    pub fn encode<'a>(&self, articles: impl IntoIterator<Item = &'a Article>) -> Vec<Vec<TokenId>> {
        training_sequences(articles, &self.vocab, self.fielded)
    }

    /// Writes the model to `path` and the vocabulary next to it
    /// (`<path>.vocab`).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.vocab.save(&vocab_path(path))?;
        #[derive(Serialize)]
        struct Bundle<'a> {
            fielded: bool,
            vocab_file: &'a str,
            model: serde_json::Value,
        }
        let vocab_file = vocab_path(path);
        let name = vocab_file.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let bundle =
            Bundle { fielded: self.fielded, model: serde_json::from_str(&self.model.to_json()?)?, vocab_file: name };
        io::write_atomic_str(path, &serde_json::to_string(&bundle)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Bundle {
            fielded: bool,
            model: serde_json::Value,
        }
        let bundle: Bundle = io::read_json(path)?;
        let model = NGramModel::from_dump(serde_json::from_value(bundle.model)?)?;
        let vocab = Vocab::load(&vocab_path(path))?;
        model.check_vocab(&vocab)?;
        Ok(Self { vocab, model, fielded: bundle.fielded })
    }
}

fn vocab_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

pub fn training_sequences<'a>(
    articles: impl IntoIterator<Item = &'a Article>,
    vocab: &Vocab,
    fielded: bool,
) -> Vec<Vec<TokenId>> {
    articles
        .into_iter()
        .map(|a| if fielded { encode_article(a, vocab) } else { encode_document(&a.body, vocab) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::tokenize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab(text: &str) -> Vocab {
        Vocab::from_texts([text], 1).unwrap()
    }

    #[test]
    fn unigram_frequency_order_and_normalization() {
        let v = vocab("a b");
        let seq = tokenize("a a b", &v);
        let m = NGramModel::train(&[seq], v.len(), 1, 0.75).unwrap();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        assert!(m.prob(&[], a) > m.prob(&[], b));
        assert!(m.prob(&[], b) > 0.0);
        let total: f64 = m.next_token_dist(&[]).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let v = vocab("the cat sat on the mat");
        let seq = tokenize("the cat sat on the mat the cat ran", &v);
        let a = NGramModel::train(std::slice::from_ref(&seq), v.len(), 2, 0.75).unwrap();
        let b = NGramModel::train(&[seq], v.len(), 2, 0.75).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn argument_checks() {
        let v = vocab("a");
        let seq = vec![v.id("a").unwrap()];
        assert!(NGramModel::train(std::slice::from_ref(&seq), v.len(), 0, 0.5).is_err());
        assert!(NGramModel::train(std::slice::from_ref(&seq), v.len(), 6, 0.5).is_err());
        assert!(NGramModel::train(std::slice::from_ref(&seq), v.len(), 2, 1.0).is_err());
        assert!(NGramModel::train(&[seq], 3, 2, 0.5).is_err());
        assert!(matches!(NGramModel::train(&[vec![]], v.len(), 2, 0.5), Err(Error::Empty(_))));
    }

    #[test]
    fn uniform_model() {
        let m = NGramModel::uniform(10);
        assert_eq!(m.sequence_logprob(&[]), 0.0);
        assert!((m.sequence_logprob(&[3]) - (0.1f64).ln()).abs() < 1e-15);
        assert!(m.next_token_dist(&[1, 2]).iter().all(|&p| p == 0.1));
        let ppl = m.perplexity(&[vec![0, 1, 2], vec![9, 9]]).unwrap();
        assert!((ppl - 10.0).abs() < 1e-9);
        assert!(m.perplexity(&[vec![]]).is_err());
    }

    #[test]
    fn deterministic_successor_is_argmax() {
        let text = "donald trump said . the senate voted . donald trump won . people cheered . donald trump left .";
        let v = vocab(text);
        let m = NGramModel::train(&[tokenize(text, &v)], v.len(), 2, 0.75).unwrap();
        let dist = m.next_token_dist(&[v.id("donald").unwrap()]);
        let argmax = (0..dist.len()).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
        assert_eq!(v.token(argmax as TokenId), "trump");
    }

    #[test]
    fn training_beats_shuffled_perplexity() {
        let text = "the quick brown fox jumps over the lazy dog . the lazy dog sleeps in the sun . \
                    the quick fox runs . a brown dog jumps over the fox .";
        let v = vocab(text);
        let seq = tokenize(text, &v);
        let m = NGramModel::train(std::slice::from_ref(&seq), v.len(), 3, 0.75).unwrap();
        let mut shuffled = seq.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        assert!(m.perplexity(&[seq]).unwrap() <= m.perplexity(&[shuffled]).unwrap());
    }

    #[test]
    fn dump_roundtrip_is_bit_identical() {
        let text = "a b c a b d a c . b c d";
        let v = vocab(text);
        let m = NGramModel::train(&[tokenize(text, &v)], v.len(), 3, 0.6)
            .unwrap()
            .bind_vocab(&v)
            .with_side(Some(Side::Right));
        let back = NGramModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        for ctx in [&[][..], &[2][..], &[12, 13][..], &[13, 14, 15][..]] {
            let (a, b) = (m.next_token_dist(ctx), back.next_token_dist(ctx));
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert!(NGramModel::from_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn language_model_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let a = Article {
            id: "1".into(),
            headline: "H".into(),
            domain: "D".into(),
            authors: vec![],
            date: None,
            body: "one two three. two three four.".into(),
            bias: None,
        };
        let v = crate::tokenizer::build_vocab(&[&crate::corpus::ArticleSet::new(vec![a.clone()], None).unwrap()], 1)
            .unwrap();
        let lm = LanguageModel::train([&a], v, TrainOptions::default(), Some(Side::Left)).unwrap();
        let path = dir.path().join("left.lm.json");
        lm.save(&path).unwrap();
        let back = LanguageModel::load(&path).unwrap();
        assert_eq!(back.model, lm.model);
        assert_eq!(back.vocab, lm.vocab);
        // a different vocabulary is rejected
        let other = vocab("x y z");
        assert!(matches!(lm.model.check_vocab(&other), Err(Error::Contract(_))));
    }

    fn random_model(seed: u64, order: usize) -> (NGramModel, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let support = rng.random_range(3..12);
        let seqs: Vec<Vec<TokenId>> = (0..rng.random_range(1..4))
            .map(|_| (0..rng.random_range(1..30)).map(|_| rng.random_range(0..support as TokenId)).collect())
            .collect();
        (NGramModel::train(&seqs, support, order, rng.random_range(0.1..0.95)).unwrap(), support)
    }

    proptest! {
        #[test]
        fn distributions_normalize_and_have_support(seed in 0u64..10_000, order in 1usize..=5, ctx_seed in 0u64..1000) {
            let (m, support) = random_model(seed, order);
            let mut rng = ChaCha8Rng::seed_from_u64(ctx_seed);
            let ctx: Vec<TokenId> = (0..rng.random_range(0..7)).map(|_| rng.random_range(0..support as TokenId)).collect();
            let dist = m.next_token_dist(&ctx);
            let total: f64 = dist.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(dist.iter().all(|&p| p > 0.0));
            for (w, &p) in dist.iter().enumerate() {
                prop_assert!((m.prob(&ctx, w as TokenId) - p).abs() < 1e-14);
            }
            // Markov truncation
            let mut longer = vec![0; 3];
            longer.extend(&ctx);
            if ctx.len() >= order - 1 {
                prop_assert_eq!(m.next_token_dist(&longer), dist);
            }
        }
    }
}
