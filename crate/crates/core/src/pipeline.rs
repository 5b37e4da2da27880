//! Two-step generation: produce articles with a per-side model, then score
//! and segregate them by the side the scorer assigns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{classify, BiasScore, Scorer, SCALE_LIMIT};
use crate::corpus::{split_sentences, Article, ArticleSet, Side};
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::lm::{generate_conditional, sample, LanguageModel, SamplingParams};
use crate::tokenizer::{join_tokens, tokenize, FieldName, FieldSet};

pub const DEFAULT_SEED_SENTENCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// Continuation of the opening sentences of a real article.
    Seeded,
    /// Body decoded from the other fields of an article.
    Fielded,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::Seeded => "seeded",
            Generator::Fielded => "fielded",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seeded" => Ok(Generator::Seeded),
            "fielded" => Ok(Generator::Fielded),
            other => Err(Error::Argument(format!("unknown generator {other:?} (expected seeded or fielded)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedArticle {
    pub source_seed_id: Option<String>,
    pub generator: Generator,
    pub side_model: Option<Side>,
    pub text: String,
    pub fields: FieldSet,
    pub score: Option<BiasScore>,
    pub params: SamplingParams,
}

/// Prompts `lm` with the first `seed_sentences` sentences of the seed body.
/// The prompt is kept verbatim at the start of the output text.
pub fn generate_seeded(
    lm: &LanguageModel,
    seed: &Article,
    seed_sentences: usize,
    params: &SamplingParams,
) -> Result<GeneratedArticle> {
    if lm.fielded {
        return Err(Error::Contract("seeded generation needs a model trained on plain documents".into()));
    }
    let sentences = split_sentences(&seed.body);
    if sentences.is_empty() {
        return Err(Error::Empty(format!("seed article {:?} has an empty body", seed.id)));
    }
    if seed_sentences == 0 {
        return Err(Error::Argument("seed_sentences must be at least 1".into()));
    }
    let prompt = sentences[..seed_sentences.min(sentences.len())].join(" ");
    let prefix = tokenize(&prompt, &lm.vocab);
    let out = sample(&lm.model, &prefix, params)?;
    let mut text = prompt;
    join_tokens(&mut text, out[prefix.len()..].iter().map(|&t| lm.vocab.token(t)));
    let mut fields = FieldSet::from_article(seed, FieldName::Body);
    fields.body = Some(text.clone());
    Ok(GeneratedArticle {
        source_seed_id: Some(seed.id.clone()),
        generator: Generator::Seeded,
        side_model: lm.model.side(),
        text,
        fields,
        score: None,
        params: *params,
    })
}

/// Generates the target field of `context` (normally the body) and records
/// the completed field set.
pub fn generate_fielded(lm: &LanguageModel, context: &FieldSet, params: &SamplingParams) -> Result<GeneratedArticle> {
    let text = generate_conditional(&lm.model, &lm.vocab, context, params)?;
    let mut fields = context.clone();
    if let Some(t) = context.target {
        fields.set(t, Some(text.clone()));
    }
    Ok(GeneratedArticle {
        source_seed_id: None,
        generator: Generator::Fielded,
        side_model: lm.model.side(),
        text,
        fields,
        score: None,
        params: *params,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Validated {
    pub left: Vec<GeneratedArticle>,
    pub right: Vec<GeneratedArticle>,
}

/// Scores every article and partitions by the sign of its score.
pub fn validate<S: Scorer + ?Sized>(scorer: &S, articles: Vec<GeneratedArticle>) -> Result<Validated> {
    let scored: Vec<GeneratedArticle> = articles
        .into_par_iter()
        .map(|mut a| {
            a.score = Some(scorer.score_text(&a.text)?.score);
            Ok(a)
        })
        .collect::<Result<_>>()?;
    let (left, right) = scored.into_iter().partition(|a| classify(a.score.expect("scored above")).side == Side::Left);
    Ok(Validated { left, right })
}

/// Counts over equal-width bins spanning [−42, +42]. The last bin is closed
/// on the right and may be narrower than `bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn empty(bin_width: f64) -> Result<Self> {
        if !bin_width.is_finite() || bin_width <= 0.0 {
            return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
        }
        let bins = (2.0 * SCALE_LIMIT / bin_width).ceil() as usize;
        Ok(Self { bin_width, counts: vec![0; bins] })
    }

    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        let lo = -SCALE_LIMIT + i as f64 * self.bin_width;
        (lo, (lo + self.bin_width).min(SCALE_LIMIT))
    }

    pub fn add(&mut self, s: BiasScore) {
        let i = ((s.value() + SCALE_LIMIT) / self.bin_width).floor() as usize;
        let last = self.counts.len() - 1;
        self.counts[i.min(last)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn bias_histogram(scores: &[BiasScore], bin_width: f64) -> Result<Histogram> {
    let mut h = Histogram::empty(bin_width)?;
    for &s in scores {
        h.add(s);
    }
    Ok(h)
}

/// One table with a column per named histogram; all must share bins.
pub fn histogram_tsv(columns: &[(&str, &Histogram)]) -> Result<String> {
    let first = columns.first().ok_or_else(|| Error::Argument("no histograms to tabulate".into()))?.1;
    if columns.iter().any(|(_, h)| h.counts.len() != first.counts.len() || h.bin_width != first.bin_width) {
        return Err(Error::Argument("histograms must share the same bins".into()));
    }
    let mut out = String::from("bin_lo\tbin_hi");
    for (name, _) in columns {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..first.counts.len() {
        let (lo, hi) = first.bin_range(i);
        out.push_str(&format!("{lo}\t{hi}"));
        for (_, h) in columns {
            out.push_str(&format!("\t{}", h.counts[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub samples_per_side: usize,
    pub seed_sentences: usize,
    pub generator: Generator,
    pub params: SamplingParams,
    pub rng_seed: u64,
    pub bin_width: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            samples_per_side: 5000,
            seed_sentences: DEFAULT_SEED_SENTENCES,
            generator: Generator::Seeded,
            params: SamplingParams::default(),
            rng_seed: 0,
            bin_width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    /// Number of distinct seed articles available to this side.
    pub seed_pool: usize,
    pub samples: usize,
    /// Mean |score| of the seed article bodies, weighted by how often each
    /// seed was used.
    pub seed_mean_abs: f64,
    pub generated_mean_abs: f64,
    /// Fraction of samples whose classified side is the model's side.
    pub agreement: Option<f64>,
    pub ties: usize,
    pub seed_histogram: Histogram,
    pub generated_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub sides: Vec<SideReport>,
    pub seed_mean_abs: f64,
    pub generated_mean_abs: f64,
    pub agreement: Option<f64>,
}

impl CampaignReport {
    pub fn seed_histogram_tsv(&self) -> Result<String> {
        let cols: Vec<(&str, &Histogram)> = self.sides.iter().map(|s| (s.side.as_str(), &s.seed_histogram)).collect();
        histogram_tsv(&cols)
    }

    pub fn generated_histogram_tsv(&self) -> Result<String> {
        let cols: Vec<(&str, &Histogram)> =
            self.sides.iter().map(|s| (s.side.as_str(), &s.generated_histogram)).collect();
        histogram_tsv(&cols)
    }
}

pub struct CampaignOutput {
    pub report: CampaignReport,
    /// Scored articles ordered by side (left first) then sample index.
    pub articles: Vec<GeneratedArticle>,
}

fn side_index(s: Side) -> u64 {
    match s {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Seed articles for each side's model.
#[derive(Debug, Clone, Copy)]
pub struct CampaignSeeds<'a> {
    pub left: &'a ArticleSet,
    pub right: &'a ArticleSet,
}

impl<'a> CampaignSeeds<'a> {
    /// Both models draw from the same pool.
    pub fn shared(pool: &'a ArticleSet) -> Self {
        Self { left: pool, right: pool }
    }

    /// Each model is seeded with articles of its own side.
    pub fn by_side(left: &'a ArticleSet, right: &'a ArticleSet) -> Self {
        Self { left, right }
    }

    /// Splits a labeled pool by the sign of the ground-truth label.
    pub fn split_by_label(pool: &ArticleSet) -> Result<(ArticleSet, ArticleSet)> {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for a in pool.iter() {
            let Some(b) = a.bias else {
                return Err(Error::Argument(format!("seed article {:?} has no bias label", a.id)));
            };
            if classify(b).side == Side::Left {
                left.push(a.clone());
            } else {
                right.push(a.clone());
            }
        }
        Ok((ArticleSet::new(left, Some(Side::Left))?, ArticleSet::new(right, Some(Side::Right))?))
    }

    pub fn get(&self, side: Side) -> &'a ArticleSet {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// Generates `samples_per_side` articles with each side's model, cycling
/// through that side's seeds round-robin, then scores seeds and samples.
pub fn run_campaign<S: Scorer + ?Sized>(
    cfg: &CampaignConfig,
    seeds: CampaignSeeds<'_>,
    left: &LanguageModel,
    right: &LanguageModel,
    scorer: &S,
) -> Result<CampaignOutput> {
    cfg.params.validate()?;
    if cfg.samples_per_side > 0 {
        if let Some(side) = Side::BOTH.into_iter().find(|&s| seeds.get(s).is_empty()) {
            return Err(Error::Empty(format!("campaign needs at least one {side} seed article")));
        }
    }
    let seed_scores: Vec<Vec<BiasScore>> = Side::BOTH
        .into_iter()
        .map(|side| {
            seeds
                .get(side)
                .articles()
                .par_iter()
                .map(|a| scorer.score_text(&a.body).map(|o| o.score))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(Side, usize)> =
        Side::BOTH.into_iter().flat_map(|s| (0..cfg.samples_per_side).map(move |i| (s, i))).collect();
    let generated: Vec<GeneratedArticle> = jobs
        .par_iter()
        .map(|&(side, i)| {
            let lm = if side == Side::Left { left } else { right };
            let pool = seeds.get(side);
            let seed = &pool.articles()[i % pool.len()];
            let params = cfg.params.with_seed(derive_seed(cfg.rng_seed, &[side_index(side), i as u64]));
            let mut g = match cfg.generator {
                Generator::Seeded => generate_seeded(lm, seed, cfg.seed_sentences, &params)?,
                Generator::Fielded => {
                    let mut g = generate_fielded(lm, &FieldSet::from_article(seed, FieldName::Body), &params)?;
                    g.source_seed_id = Some(seed.id.clone());
                    g
                }
            };
            g.side_model = Some(side);
            g.score = Some(scorer.score_text(&g.text)?.score);
            Ok(g)
        })
        .collect::<Result<_>>()?;

    let mut sides = Vec::new();
    for side in Side::BOTH {
        let offset = side_index(side) as usize * cfg.samples_per_side;
        let mine = &generated[offset..offset + cfg.samples_per_side];
        let pool = &seed_scores[side_index(side) as usize];
        let used: Vec<BiasScore> = (0..cfg.samples_per_side).map(|i| pool[i % pool.len()]).collect();
        let gen_scores: Vec<BiasScore> = mine.iter().map(|g| g.score.expect("scored")).collect();
        let agree = gen_scores.iter().filter(|&&s| classify(s).side == side).count();
        sides.push(SideReport {
            side,
            seed_pool: pool.len(),
            samples: mine.len(),
            seed_mean_abs: mean(used.iter().map(|s| s.abs())),
            generated_mean_abs: mean(gen_scores.iter().map(|s| s.abs())),
            agreement: (!mine.is_empty()).then(|| agree as f64 / mine.len() as f64),
            ties: gen_scores.iter().filter(|&&s| classify(s).tie).count(),
            seed_histogram: bias_histogram(&used, cfg.bin_width)?,
            generated_histogram: bias_histogram(&gen_scores, cfg.bin_width)?,
        });
    }
    let total = 2 * cfg.samples_per_side;
    let agreed: f64 = sides.iter().map(|s| s.agreement.unwrap_or(0.0) * s.samples as f64).sum();
    let report = CampaignReport {
        config: cfg.clone(),
        seed_mean_abs: mean(sides.iter().map(|s| s.seed_mean_abs)),
        generated_mean_abs: mean(sides.iter().map(|s| s.generated_mean_abs)),
        agreement: (total > 0).then(|| agreed.round() / total as f64),
        sides,
    };
    Ok(CampaignOutput { report, articles: generated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::ScoreOutcome;
    use crate::lm::TrainOptions;
    use crate::tokenizer::build_vocab;

    fn article(id: &str, body: &str) -> Article {
        Article {
            id: id.into(),
            headline: format!("Story {id}"),
            domain: "Vox".into(),
            authors: vec!["Jane Doe".into()],
            date: chrono::NaiveDate::from_ymd_opt(2017, 3, 1),
            body: body.into(),
            bias: None,
        }
    }

    fn corpus() -> ArticleSet {
        let bodies = [
            "The senate passed the bill. Lawmakers cheered loudly. The vote was close.",
            "The house debated the budget. Critics objected. The session ran late.",
            "Markets fell on Monday. Investors worried about rates. Analysts were split.",
        ];
        ArticleSet::new(bodies.iter().enumerate().map(|(i, b)| article(&i.to_string(), b)).collect(), None).unwrap()
    }

    fn model(fielded: bool, side: Side) -> LanguageModel {
        let set = corpus();
        let v = build_vocab(&[&set], 1).unwrap();
        LanguageModel::train(set.iter(), v, TrainOptions { fielded, order: 3, ..Default::default() }, Some(side))
            .unwrap()
    }

    /// Scores by counting "senate" (right) against "markets" (left).
    struct WordScorer;
    impl Scorer for WordScorer {
        fn score_text(&self, text: &str) -> Result<ScoreOutcome> {
            let t = text.to_lowercase();
            let v = t.matches("senate").count() as f64 - t.matches("markets").count() as f64;
            Ok(ScoreOutcome { score: BiasScore::new(v * 10.0), empty_text: t.is_empty(), clamped: false })
        }
    }

    #[test]
    fn seeded_output_keeps_prompt() {
        let lm = model(false, Side::Left);
        let set = corpus();
        let seed = &set.articles()[0];
        let p = SamplingParams { max_len: 20, rng_seed: 4, ..Default::default() };
        let g = generate_seeded(&lm, seed, 2, &p).unwrap();
        assert!(g.text.starts_with("The senate passed the bill. Lawmakers cheered loudly."), "{}", g.text);
        assert_eq!(g, generate_seeded(&lm, seed, 2, &p).unwrap());
        let whole = generate_seeded(&lm, seed, 99, &SamplingParams { max_len: 0, ..p }).unwrap();
        assert_eq!(whole.text, seed.body);
        assert_eq!(whole.side_model, Some(Side::Left));
        assert!(generate_seeded(&lm, &article("e", " "), 2, &p).is_err());
    }

    #[test]
    fn fielded_records_context() {
        let lm = model(true, Side::Right);
        let ctx = FieldSet::from_article(&corpus().articles()[1], FieldName::Body);
        let p = SamplingParams { max_len: 30, rng_seed: 1, ..Default::default() };
        let g = generate_fielded(&lm, &ctx, &p).unwrap();
        assert_eq!(g.fields.headline.as_deref(), Some("Story 1"));
        assert_eq!(g.fields.domain.as_deref(), Some("Vox"));
        assert_eq!(g.fields.authors.as_deref(), Some("Jane Doe"));
        assert_eq!(g.fields.date.as_deref(), Some("March 01, 2017"));
        assert_eq!(g.fields.body.as_deref(), Some(g.text.as_str()));
        assert_eq!(g, generate_fielded(&lm, &ctx, &p).unwrap());
        let bare = FieldSet { target: Some(FieldName::Body), ..Default::default() };
        assert!(generate_fielded(&lm, &bare, &p).is_ok());
        assert!(generate_seeded(&lm, &corpus().articles()[0], 2, &p).is_err());
    }

    fn generated(text: &str) -> GeneratedArticle {
        GeneratedArticle {
            source_seed_id: None,
            generator: Generator::Seeded,
            side_model: None,
            text: text.into(),
            fields: FieldSet::default(),
            score: None,
            params: SamplingParams::default(),
        }
    }

    #[test]
    fn validation_partitions() {
        assert_eq!(validate(&WordScorer, vec![]).unwrap(), Validated::default());
        let input: Vec<_> =
            ["senate", "markets", "nothing", "markets markets senate"].iter().map(|t| generated(t)).collect();
        let v = validate(&WordScorer, input).unwrap();
        let texts = |xs: &[GeneratedArticle]| xs.iter().map(|a| a.text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&v.left), ["markets", "markets markets senate"]);
        assert_eq!(texts(&v.right), ["senate", "nothing"]);
    }

    #[test]
    fn histogram_bins() {
        let h = bias_histogram(&[BiasScore::new(-11.01)], 2.0).unwrap();
        assert_eq!(h.counts.len(), 42);
        let nz: Vec<usize> = (0..h.counts.len()).filter(|&i| h.counts[i] > 0).collect();
        assert_eq!(nz, [15]);
        assert_eq!(h.bin_range(15), (-12.0, -10.0));
        let edges = bias_histogram(&[BiasScore::new(-42.0), BiasScore::new(42.0)], 5.0).unwrap();
        assert_eq!(edges.counts.len(), 17);
        assert_eq!((edges.counts[0], edges.counts[16]), (1, 1));
        assert_eq!(edges.bin_range(16), (38.0, 42.0));
        assert_eq!(bias_histogram(&[], 2.0).unwrap().total(), 0);
        assert!(bias_histogram(&[], 0.0).is_err());
    }

    #[test]
    fn campaign_zero_and_determinism() {
        let (l, r) = (model(false, Side::Left), model(false, Side::Right));
        let cfg = CampaignConfig { samples_per_side: 0, ..Default::default() };
        let out = run_campaign(&cfg, CampaignSeeds::shared(&corpus()), &l, &r, &WordScorer).unwrap();
        assert!(out.articles.is_empty());
        assert_eq!(out.report.agreement, None);
        assert!(out.report.sides.iter().all(|s| s.seed_histogram.total() == 0 && s.generated_histogram.total() == 0));

        let cfg = CampaignConfig {
            samples_per_side: 7,
            params: SamplingParams { max_len: 15, ..Default::default() },
            rng_seed: 3,
            ..Default::default()
        };
        let a = run_campaign(&cfg, CampaignSeeds::shared(&corpus()), &l, &r, &WordScorer).unwrap();
        let b = run_campaign(&cfg, CampaignSeeds::shared(&corpus()), &l, &r, &WordScorer).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.articles, b.articles);
        assert_eq!(a.articles.len(), 14);
        // round-robin over three seeds
        let ids: Vec<_> = a.articles[..7].iter().map(|g| g.source_seed_id.clone().unwrap()).collect();
        assert_eq!(ids, ["0", "1", "2", "0", "1", "2", "0"]);
        assert!(a.report.sides.iter().all(|s| s.generated_histogram.total() == 7));
        assert!(a.report.seed_histogram_tsv().unwrap().starts_with("bin_lo\tbin_hi\tleft\tright\n"));
    }

    #[test]
    fn campaign_seeds_by_side() {
        let mut arts = corpus().into_articles();
        for (a, b) in arts.iter_mut().zip([-3.0, 5.0, -1.0]) {
            a.bias = Some(BiasScore::new(b));
        }
        let pool = ArticleSet::new(arts, None).unwrap();
        let (l, r) = CampaignSeeds::split_by_label(&pool).unwrap();
        assert_eq!(l.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(), ["0", "2"]);
        assert_eq!(r.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(), ["1"]);
        assert!(CampaignSeeds::split_by_label(&corpus()).is_err());

        let (lm_l, lm_r) = (model(false, Side::Left), model(false, Side::Right));
        let cfg = CampaignConfig {
            samples_per_side: 3,
            params: SamplingParams { max_len: 10, ..Default::default() },
            ..Default::default()
        };
        let out = run_campaign(&cfg, CampaignSeeds::by_side(&l, &r), &lm_l, &lm_r, &WordScorer).unwrap();
        let ids: Vec<_> = out.articles.iter().map(|g| g.source_seed_id.clone().unwrap()).collect();
        assert_eq!(ids, ["0", "2", "0", "1", "1", "1"]);
        assert_eq!(out.report.sides.iter().map(|s| s.seed_pool).collect::<Vec<_>>(), [2, 1]);
        let empty = ArticleSet::default();
        assert!(run_campaign(&cfg, CampaignSeeds::by_side(&l, &empty), &lm_l, &lm_r, &WordScorer).is_err());
    }
}
