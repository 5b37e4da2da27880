//! Article collections: CSV ingestion, persistence, seeded splits, ledes and
//! a synthetic corpus generator with planted side-indicative terms.

mod sentences;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bias::BiasScore;
use crate::error::{Error, Result};
use crate::io;

pub use sentences::{split_sentences, SentenceSplitter, DEFAULT_ABBREVIATIONS};
pub use synth::{synth_corpus, SynthSpec};

/// Political side of an article, model or judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Argument(format!("unknown side {other:?}"))),
        }
    }
}

/// One news item. Persisted as a JSON line with exactly the fields
/// `id, headline, domain, authors, date, body, bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub headline: String,
    pub domain: String,
    pub authors: Vec<String>,
    #[serde(with = "date_format")]
    pub date: Option<NaiveDate>,
    pub body: String,
    pub bias: Option<BiasScore>,
}

mod date_format {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<NaiveDate>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_str(&d.format("%Y-%m-%d").to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        Ok(raw.as_deref().and_then(super::parse_date))
    }
}

/// Accepts the date layouts seen in news dumps; anything else is absent.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    const FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%B %d, %Y", "%b %d, %Y", "%d %B %Y"];
    let head = raw.split(['T', ' ']).next().unwrap_or(raw);
    FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(raw, f).ok())
        .or_else(|| NaiveDate::parse_from_str(head, "%Y-%m-%d").ok())
}

/// An ordered collection of articles with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArticleSet {
    articles: Vec<Article>,
    label: Option<Side>,
}

impl ArticleSet {
    pub fn new(articles: Vec<Article>, label: Option<Side>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(articles.len());
        for a in &articles {
            if !seen.insert(a.id.as_str()) {
                return Err(Error::Format(format!("duplicate article id {:?}", a.id)));
            }
        }
        Ok(Self { articles, label })
    }

    pub fn empty(label: Option<Side>) -> Self {
        Self { articles: Vec::new(), label }
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn into_articles(self) -> Vec<Article> {
        self.articles
    }

    pub fn label(&self) -> Option<Side> {
        self.label
    }

    pub fn with_label(mut self, label: Option<Side>) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Article> {
        self.articles.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.articles.iter().map(|a| a.id.as_str()).collect()
    }

    /// Concatenates sets; fails on id collisions.
    pub fn concat(sets: &[&ArticleSet], label: Option<Side>) -> Result<Self> {
        let articles = sets.iter().flat_map(|s| s.articles.iter().cloned()).collect();
        Self::new(articles, label)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        io::to_jsonl(&self.articles)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.articles)
    }

    pub fn load(path: &Path, label: Option<Side>) -> Result<Self> {
        Self::new(io::read_jsonl(path)?, label)
    }
}

impl<'a> IntoIterator for &'a ArticleSet {
    type Item = &'a Article;
    type IntoIter = std::slice::Iter<'a, Article>;

    fn into_iter(self) -> Self::IntoIter {
        self.articles.iter()
    }
}

/// CSV column names for each article field. `id: None` numbers rows instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub headline: String,
    pub domain: String,
    pub authors: String,
    pub date: String,
    pub body: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: Some("id".into()),
            headline: "title".into(),
            domain: "publication".into(),
            authors: "author".into(),
            date: "date".into(),
            body: "content".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub delimiter: u8,
    pub author_delimiter: char,
    pub label: Option<Side>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { columns: ColumnMap::default(), delimiter: b',', author_delimiter: ';', label: None }
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub set: ArticleSet,
    /// Rows dropped because their body was empty.
    pub skipped_empty: usize,
    /// Retained rows whose date did not parse (kept with the date absent).
    pub unparsed_dates: usize,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<IngestReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, opts)
}

/// Reads a headed CSV stream into an [`ArticleSet`], preserving row order.
pub fn ingest_reader(reader: impl std::io::Read, opts: &IngestOptions) -> Result<IngestReport> {
    let mut rdr =
        csv::ReaderBuilder::new().delimiter(opts.delimiter).has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("CSV has no column named {name:?}")))
    };
    let cm = &opts.columns;
    let id_col = cm.id.as_deref().map(col).transpose()?;
    let (h, d, au, dt, b) = (col(&cm.headline)?, col(&cm.domain)?, col(&cm.authors)?, col(&cm.date)?, col(&cm.body)?);

    let mut articles = Vec::new();
    let mut skipped_empty = 0;
    let mut unparsed_dates = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let body = field(b);
        if body.is_empty() {
            skipped_empty += 1;
            continue;
        }
        let raw_date = field(dt);
        let date = parse_date(raw_date);
        if date.is_none() && !raw_date.is_empty() {
            unparsed_dates += 1;
        }
        let id = match id_col {
            Some(i) => field(i).to_string(),
            None => format!("row-{}", row + 1),
        };
        articles.push(Article {
            id,
            headline: field(h).to_string(),
            domain: field(d).to_string(),
            authors: field(au)
                .split(opts.author_delimiter)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            date,
            body: body.to_string(),
            bias: None,
        });
    }
    log::info!("ingested {} articles, skipped {skipped_empty} with empty body", articles.len());
    Ok(IngestReport { set: ArticleSet::new(articles, opts.label)?, skipped_empty, unparsed_dates })
}

/// Seeded uniform split without replacement. Both halves keep input order.
pub fn train_test_split(set: &ArticleSet, test_count: usize, rng_seed: u64) -> Result<(ArticleSet, ArticleSet)> {
    if test_count >= set.len() && !(test_count == 0 && set.is_empty()) {
        return Err(Error::Argument(format!(
            "test_count {test_count} must be smaller than the set size {}",
            set.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut is_test = vec![false; set.len()];
    for i in index::sample(&mut rng, set.len(), test_count) {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (a, t) in set.articles.iter().zip(is_test) {
        if t {
            test.push(a.clone())
        } else {
            train.push(a.clone())
        }
    }
    Ok((ArticleSet { articles: train, label: set.label }, ArticleSet { articles: test, label: set.label }))
}

/// Truncation levels used for granularity analysis. `Headline` is lede-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LedeLevel {
    Headline,
    Three,
    Ten,
    Full,
}

impl LedeLevel {
    pub const ALL: [LedeLevel; 4] = [LedeLevel::Headline, LedeLevel::Three, LedeLevel::Ten, LedeLevel::Full];

    pub fn label(self) -> &'static str {
        match self {
            LedeLevel::Headline => "lede-1",
            LedeLevel::Three => "lede-3",
            LedeLevel::Ten => "lede-10",
            LedeLevel::Full => "full",
        }
    }
}

/// Text of an article at a lede level. Body levels are sentence joins, so
/// each is a prefix of the next.
pub fn lede(article: &Article, level: LedeLevel) -> String {
    let sentences = split_sentences(&article.body);
    let take = match level {
        LedeLevel::Headline => return article.headline.clone(),
        LedeLevel::Three => 3,
        LedeLevel::Ten => 10,
        LedeLevel::Full => sentences.len(),
    };
    sentences[..take.min(sentences.len())].join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: &str, body: &str) -> Article {
        Article {
            id: id.into(),
            headline: format!("Headline {id}"),
            domain: "CNN".into(),
            authors: vec!["Eugene Scott".into()],
            date: NaiveDate::from_ymd_opt(2016, 12, 31),
            body: body.into(),
            bias: None,
        }
    }

    fn set_of(n: usize) -> ArticleSet {
        ArticleSet::new((0..n).map(|i| article(&i.to_string(), "Body.")).collect(), None).unwrap()
    }

    const CSV: &str = "id,title,publication,author,date,content\n\
        1,Trump ditches press pool,CNN,Eugene Scott,2016-12-31,The trip marked a first.\n\
        2,Empty one,Vox,A;B,2017-01-02,\n\
        3,Shaun King,Breitbart,Jack Montgomery; Jane Roe,June 01 2017,Wednesday night he tweeted.\n";

    #[test]
    fn ingest_skips_empty_bodies() {
        let r = ingest_reader(CSV.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(r.set.len(), 2);
        assert_eq!(r.skipped_empty, 1);
        assert_eq!(r.set.ids(), vec!["1", "3"]);
        let a = &r.set.articles()[1];
        assert_eq!(a.authors, vec!["Jack Montgomery", "Jane Roe"]);
        // unparseable date keeps the article
        assert_eq!(a.date, None);
        assert_eq!(r.unparsed_dates, 1);
        assert_eq!(r.set.articles()[0].date, NaiveDate::from_ymd_opt(2016, 12, 31));
    }

    #[test]
    fn permuted_columns_with_map_match_default_layout() {
        let permuted = "body_text,source,headline,key,when,writers\n\
            The trip marked a first.,CNN,Trump ditches press pool,1,2016-12-31,Eugene Scott\n\
            ,Vox,Empty one,2,2017-01-02,A;B\n\
            Wednesday night he tweeted.,Breitbart,Shaun King,3,June 01 2017,Jack Montgomery; Jane Roe\n";
        let opts = IngestOptions {
            columns: ColumnMap {
                id: Some("key".into()),
                headline: "headline".into(),
                domain: "source".into(),
                authors: "writers".into(),
                date: "when".into(),
                body: "body_text".into(),
            },
            ..Default::default()
        };
        let a = ingest_reader(CSV.as_bytes(), &IngestOptions::default()).unwrap();
        let b = ingest_reader(permuted.as_bytes(), &opts).unwrap();
        assert_eq!(a.set, b.set);
        assert_eq!(a.skipped_empty, b.skipped_empty);
    }

    #[test]
    fn missing_column_is_config_error() {
        let opts =
            IngestOptions { columns: ColumnMap { body: "text".into(), ..Default::default() }, ..Default::default() };
        let err = ingest_reader(CSV.as_bytes(), &opts).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = ingest_csv(Path::new("/nonexistent/news.csv"), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn tab_delimiter_and_generated_ids() {
        let tsv = "title\tpublication\tauthor\tdate\tcontent\nH\tD\tA\t2016-01-01\tB.\n";
        let opts = IngestOptions {
            columns: ColumnMap { id: None, ..Default::default() },
            delimiter: b'\t',
            ..Default::default()
        };
        let r = ingest_reader(tsv.as_bytes(), &opts).unwrap();
        assert_eq!(r.set.ids(), vec!["row-1"]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = ArticleSet::new(vec![article("x", "a."), article("x", "b.")], None).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn jsonl_roundtrip_uses_canonical_field_names() {
        let mut a = article("7", "One. Two.");
        a.bias = Some(BiasScore::new(-13.0));
        let set = ArticleSet::new(vec![a], None).unwrap();
        let line = set.to_jsonl().unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["authors", "bias", "body", "date", "domain", "headline", "id"]);
        assert_eq!(v["date"], "2016-12-31");
        let back: Vec<Article> = io::parse_jsonl(line.as_bytes()).unwrap();
        assert_eq!(back, set.articles());
    }

    #[test]
    fn degenerate_and_extreme_splits() {
        let set = set_of(10);
        let (train, test) = train_test_split(&set, 0, 1).unwrap();
        assert_eq!((train.len(), test.len()), (10, 0));
        let (train, test) = train_test_split(&set, 9, 1).unwrap();
        assert_eq!((train.len(), test.len()), (1, 9));
        let mut all: Vec<_> = train.ids().into_iter().chain(test.ids()).collect();
        all.sort();
        let mut expected = set.ids();
        expected.sort();
        assert_eq!(all, expected);
        assert!(train_test_split(&set, 10, 1).is_err());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let set = set_of(50);
        let a = train_test_split(&set, 20, 42).unwrap().1;
        let b = train_test_split(&set, 20, 42).unwrap().1;
        assert_eq!(a.ids(), b.ids());
        let c = train_test_split(&set, 20, 43).unwrap().1;
        assert_ne!(a.ids(), c.ids());
    }

    #[test]
    fn lede_levels() {
        let short = article("s", "One. Two.");
        assert_eq!(lede(&short, LedeLevel::Ten), "One. Two.");
        assert_eq!(lede(&short, LedeLevel::Headline), "Headline s");

        let body: Vec<String> = (1..=12).map(|i| format!("Sentence {i}.")).collect();
        let long = article("l", &body.join("  "));
        let l3 = lede(&long, LedeLevel::Three);
        let l10 = lede(&long, LedeLevel::Ten);
        let full = lede(&long, LedeLevel::Full);
        assert_eq!(l3, "Sentence 1. Sentence 2. Sentence 3.");
        assert!(l10.starts_with(&l3));
        assert!(full.starts_with(&l10));
        assert!(full.ends_with("Sentence 12."));
    }
}
