//! Seeded decoding: temperature, top-k truncation, greedy limit, and
//! field-conditioned generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NGramModel;
use crate::error::{Error, Result};
use crate::tokenizer::{detokenize, encode_fields, is_reserved, FieldSet, TokenId, Vocab, END_OF_DOC_ID};

/// Below this temperature decoding is greedy.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Maximum number of generated tokens.
    pub max_len: usize,
    pub temperature: f64,
    /// `None` keeps the whole vocabulary.
    pub top_k: Option<usize>,
    pub rng_seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { max_len: 400, temperature: 1.0, top_k: Some(40), rng_seed: 0 }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::Argument(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(Error::Argument("top_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }
}

/// Picks one token from `dist` restricted to `allowed` ids.
fn choose(
    dist: &[f64],
    allowed: impl Fn(TokenId) -> bool,
    params: &SamplingParams,
    rng: &mut ChaCha8Rng,
) -> Option<TokenId> {
    let mut cands: Vec<(TokenId, f64)> =
        dist.iter().enumerate().map(|(i, &p)| (i as TokenId, p)).filter(|&(i, p)| p > 0.0 && allowed(i)).collect();
    if cands.is_empty() {
        return None;
    }
    // probability descending, id ascending
    let by_rank = |a: &(TokenId, f64), b: &(TokenId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if params.temperature < GREEDY_TEMPERATURE {
        return cands.into_iter().min_by(by_rank).map(|(i, _)| i);
    }
    if let Some(k) = params.top_k {
        if k < cands.len() {
            cands.select_nth_unstable_by(k - 1, by_rank);
            cands.truncate(k);
        }
        cands.sort_unstable_by(by_rank);
    }
    let log_max = cands.iter().map(|&(_, p)| p.ln()).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = cands.iter().map(|&(_, p)| ((p.ln() - log_max) / params.temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (&(id, _), w) in cands.iter().zip(&weights) {
        if u < *w {
            return Some(id);
        }
        u -= w;
    }
    cands.last().map(|&(i, _)| i)
}

/// Extends `prefix` by up to `params.max_len` tokens, stopping after
/// `stop` is drawn (the stop token is not appended). Only ids accepted by
/// `allowed` (plus `stop`) can be drawn.
fn decode(
    model: &NGramModel,
    prefix: &[TokenId],
    params: &SamplingParams,
    stop: TokenId,
    allowed: impl Fn(TokenId) -> bool,
) -> Result<(Vec<TokenId>, bool)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut seq = prefix.to_vec();
    for _ in 0..params.max_len {
        let dist = model.next_token_dist(&seq);
        match choose(&dist, |t| t == stop || allowed(t), params, &mut rng) {
            Some(t) if t == stop => return Ok((seq, true)),
            Some(t) => seq.push(t),
            None => break,
        }
    }
    Ok((seq, false))
}

/// Continues `seed_tokens` with at most `params.max_len` sampled tokens.
/// Reserved tokens are never drawn; drawing `<eod>` ends the document.
pub fn sample(model: &NGramModel, seed_tokens: &[TokenId], params: &SamplingParams) -> Result<Vec<TokenId>> {
    decode(model, seed_tokens, params, END_OF_DOC_ID, |t| !is_reserved(t)).map(|(s, _)| s)
}

/// Tokens decoded for a target field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecode {
    /// Generated tokens, without the context and without `<end-target>`.
    pub tokens: Vec<TokenId>,
    /// Whether decoding stopped on `<end-target>` rather than `max_len`.
    pub ended: bool,
}

/// Decodes the target field of `fs` after its encoded context until
/// `<end-target>` or `max_len` tokens.
pub fn decode_field(model: &NGramModel, vocab: &Vocab, fs: &FieldSet, params: &SamplingParams) -> Result<FieldDecode> {
    model.check_vocab(vocab)?;
    let prefix = encode_fields(fs, vocab)?;
    let target = fs.target.expect("encode_fields checked the target");
    if !(model.has_seen(target.start_id()) && model.has_seen(target.end_id())) {
        return Err(Error::Contract(format!(
            "model was not trained on field-encoded articles (no <start-{target}>/<end-{target}> tokens)"
        )));
    }
    let (mut seq, ended) = decode(model, &prefix, params, target.end_id(), |t| !is_reserved(t))?;
    Ok(FieldDecode { tokens: seq.split_off(prefix.len()), ended })
}

/// Generates the target field of `fs` as text.
pub fn generate_conditional(
    model: &NGramModel,
    vocab: &Vocab,
    fs: &FieldSet,
    params: &SamplingParams,
) -> Result<String> {
    decode_field(model, vocab, fs, params).map(|d| detokenize(&d.tokens, vocab))
}
