//! Word tokenization, vocabularies and field-token encoding.
//!
//! Text is lowercased and cut into maximal alphanumeric runs (an apostrophe
//! between two alphanumerics stays inside the word) and single punctuation
//! characters. Reserved tokens all contain `<`, which the tokenizer always
//! emits as a token of its own, so no input text can produce one.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Article, ArticleSet};
use crate::error::{Error, Result};
use crate::io;

pub type TokenId = u32;

pub const UNK: &str = "<unk>";
/// Appended to every document when training plain (non-field) models.
pub const END_OF_DOC: &str = "<eod>";

pub const UNK_ID: TokenId = 0;
pub const END_OF_DOC_ID: TokenId = 1;

/// Article fields available for conditional generation, in encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldName {
    Domain,
    Date,
    Authors,
    Headline,
    Body,
}

impl FieldName {
    pub const ALL: [FieldName; 5] =
        [FieldName::Domain, FieldName::Date, FieldName::Authors, FieldName::Headline, FieldName::Body];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldName::Domain => "domain",
            FieldName::Date => "date",
            FieldName::Authors => "authors",
            FieldName::Headline => "headline",
            FieldName::Body => "body",
        }
    }

    fn index(self) -> u32 {
        FieldName::ALL.iter().position(|&f| f == self).expect("listed") as u32
    }

    pub fn start_id(self) -> TokenId {
        2 + 2 * self.index()
    }

    pub fn end_id(self) -> TokenId {
        3 + 2 * self.index()
    }
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown field name {s:?}")))
    }
}

/// Surface forms of the reserved tokens, in id order.
pub fn reserved_tokens() -> Vec<String> {
    let mut out = vec![UNK.to_string(), END_OF_DOC.to_string()];
    for f in FieldName::ALL {
        out.push(format!("<start-{f}>"));
        out.push(format!("<end-{f}>"));
    }
    out
}

pub const RESERVED_COUNT: usize = 2 + 2 * FieldName::ALL.len();

pub fn is_reserved(id: TokenId) -> bool {
    (id as usize) < RESERVED_COUNT
}

/// Lowercased word/punctuation tokens of `text`.
pub fn word_tokens(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe =
            matches!(c, '\'' | '’') && !cur.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_apostrophe {
            cur.extend(c.to_lowercase());
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Token ↔ id map. Ids `0..RESERVED_COUNT` are the reserved tokens; the
/// rest are corpus tokens ordered by descending count, then lexically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, TokenId>,
    fingerprint: String,
}

const VOCAB_HEADER: &str = "newsbias-vocab\t1";

impl Vocab {
    fn from_entries(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = reserved_tokens();
        let mut counts = vec![0; tokens.len()];
        for (t, c) in entries {
            tokens.push(t);
            counts.push(c);
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        let mut v = Self { tokens, counts, index, fingerprint: String::new() };
        let digest = Sha256::digest(v.to_text().as_bytes());
        v.fingerprint = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        v
    }

    /// Vocabulary over every token occurring at least `min_count` times in
    /// `texts`.
    pub fn from_texts<'a, I>(texts: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if min_count == 0 {
            return Err(Error::Argument("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for text in texts {
            for t in word_tokens(text) {
                *counts.entry(t).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::Empty("cannot build a vocabulary from an empty corpus".into()));
        }
        Ok(Self::from_entries(counts.into_iter().filter(|(_, c)| *c >= min_count).collect()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get(id as usize).map_or(UNK, String::as_str)
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    /// Corpus (non-reserved) tokens with their counts, in id order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens[RESERVED_COUNT..].iter().zip(&self.counts[RESERVED_COUNT..]).map(|(t, &c)| (t.as_str(), c))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{VOCAB_HEADER}\nreserved\t{RESERVED_COUNT}\n");
        for t in &self.tokens[..RESERVED_COUNT] {
            out.push_str(t);
            out.push('\n');
        }
        for (t, c) in self.entries() {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: String| Error::Format(format!("vocabulary file: {m}"));
        if lines.next() != Some(VOCAB_HEADER) {
            return Err(bad("missing or unsupported version header".into()));
        }
        let n_reserved: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("reserved\t"))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing reserved count".into()))?;
        let reserved: Vec<String> = lines.by_ref().take(n_reserved).map(String::from).collect();
        if reserved != reserved_tokens() {
            return Err(bad("reserved tokens do not match this build".into()));
        }
        let mut entries = Vec::new();
        for l in lines.filter(|l| !l.is_empty()) {
            let (t, c) = l.split_once('\t').ok_or_else(|| bad(format!("bad entry {l:?}")))?;
            let c = c.parse().map_err(|_| bad(format!("bad count in {l:?}")))?;
            entries.push((t.to_string(), c));
        }
        let v = Self::from_entries(entries);
        if v.index.len() != v.tokens.len() {
            return Err(bad("duplicate tokens".into()));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic_str(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&io::read_to_string(path)?)
    }

    /// Content hash used by models to check they are paired with the
    /// vocabulary they were trained on.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Every text field of an article (date rendered as e.g. "June 01, 2017").
pub fn article_texts(a: &Article) -> Vec<String> {
    vec![
        a.domain.clone(),
        a.date.map(|d| format_date(&d)).unwrap_or_default(),
        a.authors.join(", "),
        a.headline.clone(),
        a.body.clone(),
    ]
}

pub fn format_date(d: &chrono::NaiveDate) -> String {
    d.format("%B %d, %Y").to_string()
}

/// Vocabulary over all text fields of all articles in `sets`.
pub fn build_vocab(sets: &[&ArticleSet], min_count: u64) -> Result<Vocab> {
    let texts: Vec<String> = sets.iter().flat_map(|s| s.iter()).flat_map(article_texts).collect();
    Vocab::from_texts(texts.iter().map(String::as_str), min_count)
}

pub fn tokenize(text: &str, vocab: &Vocab) -> Vec<TokenId> {
    word_tokens(text).iter().map(|t| vocab.id(t).unwrap_or(UNK_ID)).collect()
}

fn no_space_before(t: &str) -> bool {
    matches!(t, "." | "," | "!" | "?" | ";" | ":" | ")" | "]" | "}" | "%")
}

/// Appends `tokens` to `out`, attaching punctuation to its neighbours.
pub fn join_tokens<'a>(out: &mut String, tokens: impl IntoIterator<Item = &'a str>) {
    for t in tokens {
        let glue = out.is_empty()
            || out.ends_with(char::is_whitespace)
            || no_space_before(t)
            || out.ends_with(['(', '[', '{', '$']);
        if !glue {
            out.push(' ');
        }
        out.push_str(t);
    }
}

pub fn detokenize(ids: &[TokenId], vocab: &Vocab) -> String {
    let mut out = String::new();
    join_tokens(&mut out, ids.iter().map(|&i| vocab.token(i)));
    out
}

/// Article record split into fields, one of which is the generation target.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSet {
    pub domain: Option<String>,
    pub date: Option<String>,
    pub authors: Option<String>,
    pub headline: Option<String>,
    pub body: Option<String>,
    pub target: Option<FieldName>,
}

impl FieldSet {
    pub fn from_article(a: &Article, target: FieldName) -> Self {
        let non_empty = |s: String| (!s.trim().is_empty()).then_some(s);
        let mut fs = FieldSet {
            domain: non_empty(a.domain.clone()),
            date: a.date.map(|d| format_date(&d)),
            authors: non_empty(a.authors.join(", ")),
            headline: non_empty(a.headline.clone()),
            body: non_empty(a.body.clone()),
            target: Some(target),
        };
        fs.set(target, None);
        fs
    }

    pub fn get(&self, f: FieldName) -> Option<&str> {
        match f {
            FieldName::Domain => self.domain.as_deref(),
            FieldName::Date => self.date.as_deref(),
            FieldName::Authors => self.authors.as_deref(),
            FieldName::Headline => self.headline.as_deref(),
            FieldName::Body => self.body.as_deref(),
        }
    }

    pub fn set(&mut self, f: FieldName, value: Option<String>) {
        let slot = match f {
            FieldName::Domain => &mut self.domain,
            FieldName::Date => &mut self.date,
            FieldName::Authors => &mut self.authors,
            FieldName::Headline => &mut self.headline,
            FieldName::Body => &mut self.body,
        };
        *slot = value;
    }

    /// Present fields other than the target, in encoding order.
    pub fn context_fields(&self) -> Vec<FieldName> {
        FieldName::ALL.into_iter().filter(|&f| Some(f) != self.target && self.get(f).is_some()).collect()
    }
}

/// `<start-f> tokens(f) <end-f>` for each context field in fixed order,
/// followed by `<start-target>`.
pub fn encode_fields(fs: &FieldSet, vocab: &Vocab) -> Result<Vec<TokenId>> {
    let target = fs.target.ok_or_else(|| Error::Argument("field set has no target field".into()))?;
    let mut out = Vec::new();
    for f in fs.context_fields() {
        out.push(f.start_id());
        out.extend(tokenize(fs.get(f).unwrap_or_default(), vocab));
        out.push(f.end_id());
    }
    out.push(target.start_id());
    Ok(out)
}

/// Training sequence for field-conditioned models: every present field of
/// the article wrapped in its start/end tokens.
pub fn encode_article(a: &Article, vocab: &Vocab) -> Vec<TokenId> {
    let mut out = Vec::new();
    for (f, text) in FieldName::ALL.into_iter().zip(article_texts(a)) {
        if text.trim().is_empty() {
            continue;
        }
        out.push(f.start_id());
        out.extend(tokenize(&text, vocab));
        out.push(f.end_id());
    }
    out
}

/// Plain training sequence: body tokens followed by `<eod>`.
pub fn encode_document(text: &str, vocab: &Vocab) -> Vec<TokenId> {
    let mut out = tokenize(text, vocab);
    out.push(END_OF_DOC_ID);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn vocab(text: &str) -> Vocab {
        Vocab::from_texts([text], 1).unwrap()
    }

    #[test]
    fn punctuation_is_split() {
        assert_eq!(word_tokens("Hello, world"), ["hello", ",", "world"]);
        assert_eq!(word_tokens("Trump's \"win\"!"), ["trump's", "\"", "win", "\"", "!"]);
        assert_eq!(word_tokens("<unk>"), ["<", "unk", ">"]);
    }

    #[test]
    fn min_count_threshold() {
        let v = Vocab::from_texts(["a a b"], 2).unwrap();
        assert!(v.id("a").is_some());
        assert!(v.id("b").is_none());
        let v = Vocab::from_texts(["a a b"], 1).unwrap();
        assert!(v.id("a").is_some() && v.id("b").is_some());
        assert!(Vocab::from_texts(["   "], 1).is_err());
        assert!(Vocab::from_texts(["a"], 0).is_err());
    }

    #[test]
    fn vocab_size_matches_independent_count() {
        let texts = ["The cat sat. The dog sat!", "A cat, a dog; the end."];
        for min_count in 1..4u64 {
            let v = Vocab::from_texts(texts, min_count).unwrap();
            // independent scan: whitespace split, then peel punctuation by hand
            let mut counts: HashMap<String, u64> = HashMap::new();
            for t in texts {
                for w in t.split_whitespace() {
                    let w = w.to_lowercase();
                    let core = w.trim_end_matches(|c: char| !c.is_alphanumeric());
                    *counts.entry(core.to_string()).or_default() += 1;
                    for p in w[core.len()..].chars() {
                        *counts.entry(p.to_string()).or_default() += 1;
                    }
                }
            }
            let distinct = counts.values().filter(|&&c| c >= min_count).count();
            assert_eq!(v.len(), distinct + RESERVED_COUNT, "min_count {min_count}");
        }
    }

    #[test]
    fn out_of_vocab_maps_to_unk() {
        let v = vocab("hello world");
        assert_eq!(tokenize("hello mars", &v), vec![v.id("hello").unwrap(), UNK_ID]);
    }

    #[test]
    fn detokenize_roundtrip() {
        let text = "Trump ditches press pool to play golf, (again) in New Jersey.";
        let v = vocab(text);
        assert_eq!(detokenize(&tokenize(text, &v), &v), text.to_lowercase());
    }

    #[test]
    fn vocab_persistence_roundtrip() {
        let v = vocab("b a a c c c");
        let back = Vocab::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
        let text = v.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], VOCAB_HEADER);
        assert_eq!(lines[2], UNK);
        assert_eq!(lines[2 + RESERVED_COUNT], "c\t3");
        assert!(Vocab::from_text("garbage").is_err());
    }

    #[test]
    fn encode_with_empty_context() {
        let v = vocab("x");
        let fs = FieldSet { target: Some(FieldName::Body), ..Default::default() };
        assert_eq!(encode_fields(&fs, &v).unwrap(), vec![FieldName::Body.start_id()]);
        assert!(encode_fields(&FieldSet::default(), &v).is_err());
        assert!("bodyy".parse::<FieldName>().is_err());
    }

    #[test]
    fn encode_single_field() {
        let v = vocab("x");
        let fs = FieldSet { headline: Some("x".into()), target: Some(FieldName::Body), ..Default::default() };
        assert_eq!(
            encode_fields(&fs, &v).unwrap(),
            vec![
                FieldName::Headline.start_id(),
                v.id("x").unwrap(),
                FieldName::Headline.end_id(),
                FieldName::Body.start_id()
            ]
        );
    }

    #[test]
    fn encoding_order_is_fixed() {
        let v = vocab("cnn june 01 , 2017 eugene scott golf trip");
        let values = [
            (FieldName::Headline, "golf trip"),
            (FieldName::Authors, "eugene scott"),
            (FieldName::Date, "june 01, 2017"),
            (FieldName::Domain, "cnn"),
        ];
        let build = |order: &[usize]| {
            let mut fs = FieldSet { target: Some(FieldName::Body), ..Default::default() };
            for &i in order {
                fs.set(values[i].0, Some(values[i].1.into()));
            }
            encode_fields(&fs, &v).unwrap()
        };
        let reference = build(&[3, 2, 1, 0]);
        for order in [[0, 1, 2, 3], [2, 0, 3, 1], [1, 3, 0, 2]] {
            assert_eq!(build(&order), reference);
        }
        let starts: Vec<TokenId> = reference.iter().copied().filter(|&t| is_reserved(t) && (t % 2 == 0)).collect();
        assert_eq!(
            starts,
            [FieldName::Domain, FieldName::Date, FieldName::Authors, FieldName::Headline, FieldName::Body]
                .map(FieldName::start_id)
        );
    }

    proptest! {
        #[test]
        fn tokenize_never_emits_reserved(text in "\\PC{0,60}") {
            let v = Vocab::from_texts([text.as_str(), "<start-body> <unk>"], 1).unwrap();
            let ids = tokenize(&text, &v);
            prop_assert!(ids.iter().all(|&i| i == UNK_ID || !is_reserved(i)));
            let reserved: HashSet<String> = reserved_tokens().into_iter().collect();
            prop_assert!(word_tokens(&text).iter().all(|t| !reserved.contains(t)));
        }

        #[test]
        fn encode_fields_structure(h in proptest::option::of("[a-z ]{0,12}"), d in proptest::option::of("[a-z]{1,6}")) {
            let v = Vocab::from_texts(["a b c"], 1).unwrap();
            let fs = FieldSet { headline: h.clone(), domain: d.clone(), target: Some(FieldName::Body), ..Default::default() };
            let enc = encode_fields(&fs, &v).unwrap();
            prop_assert_eq!(*enc.last().unwrap(), FieldName::Body.start_id());
            for (f, present) in [(FieldName::Headline, h.is_some()), (FieldName::Domain, d.is_some())] {
                let starts = enc.iter().filter(|&&t| t == f.start_id()).count();
                let ends = enc.iter().filter(|&&t| t == f.end_id()).count();
                prop_assert_eq!((starts, ends), (present as usize, present as usize));
            }
        }
    }
}
