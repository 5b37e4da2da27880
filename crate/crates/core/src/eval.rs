//! Human-evaluation harness: excerpting, task construction with hidden
//! answer keys, the judgment log, and the study metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bias::{classify, BiasScore};
use crate::corpus::{split_sentences, Article, Side};
use crate::error::{Error, Result};
use crate::io::{self, derive_seed};
use crate::pipeline::GeneratedArticle;

pub const DEFAULT_TASKS_PER_ANNOTATOR: usize = 10;

/// First `k` sentences of `text`, with `k` forced or drawn from {3, 4}.
pub fn excerpt(text: &str, k: Option<usize>, rng_seed: u64) -> Result<String> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(Error::Empty("cannot excerpt an empty text".into()));
    }
    let k = match k {
        Some(k @ (3 | 4)) => k,
        Some(other) => return Err(Error::Argument(format!("excerpt length must be 3 or 4 sentences, got {other}"))),
        None => ChaCha8Rng::seed_from_u64(rng_seed).random_range(3..=4),
    };
    Ok(sentences[..k.min(sentences.len())].join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Turing,
    Bias,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "turing" => Ok(TaskKind::Turing),
            "bias" => Ok(TaskKind::Bias),
            other => Err(Error::Argument(format!("unknown task kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorGroup {
    Native,
    Nonnative,
}

impl AnnotatorGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotatorGroup::Native => "native",
            AnnotatorGroup::Nonnative => "nonnative",
        }
    }
}

impl FromStr for AnnotatorGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" => Ok(AnnotatorGroup::Native),
            "nonnative" | "non-native" => Ok(AnnotatorGroup::Nonnative),
            other => Err(Error::Argument(format!("unknown annotator group {other:?}"))),
        }
    }
}

/// What an annotator sees. Contains nothing that reveals the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub task_id: String,
    pub annotator: String,
    pub kind: TaskKind,
    /// Two excerpts (a, b) for Turing tasks, one for bias tasks.
    pub excerpts: Vec<String>,
    /// Zero-based position of this task in the annotator's sequence.
    pub position: usize,
    pub total: usize,
}

/// The hidden part of a task, kept server-side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskKey {
    pub generator: String,
    /// Index (0 = a, 1 = b) of the human-written excerpt.
    pub human_position: Option<usize>,
    pub auto_score: Option<BiasScore>,
    pub source_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub payload: TaskPayload,
    pub key: TaskKey,
}

impl AnnotationTask {
    pub fn id(&self) -> &str {
        &self.payload.task_id
    }
}

/// `count` indices into a pool of `n`, without replacement while the pool
/// lasts, then starting a fresh permutation.
fn draw(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let take = (count - out.len()).min(n);
        out.extend(index::sample(rng, n, take));
    }
    out
}

fn kind_tag(kind: TaskKind) -> u64 {
    match kind {
        TaskKind::Turing => 1,
        TaskKind::Bias => 2,
    }
}

/// Pairs of (human, machine) excerpts per annotator with the human
/// excerpt's screen position drawn uniformly.
pub fn make_turing_tasks(
    human_pool: &[Article],
    machine_pool: &[GeneratedArticle],
    tasks_per_annotator: usize,
    annotators: &[String],
    rng_seed: u64,
) -> Result<Vec<AnnotationTask>> {
    if human_pool.is_empty() || machine_pool.is_empty() {
        return Err(Error::Empty("turing tasks need non-empty human and machine pools".into()));
    }
    check_annotators(annotators)?;
    let mut tasks = Vec::new();
    for (a, who) in annotators.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &[kind_tag(TaskKind::Turing), a as u64]));
        let hs = draw(&mut rng, human_pool.len(), tasks_per_annotator);
        let ms = draw(&mut rng, machine_pool.len(), tasks_per_annotator);
        for (i, (&h, &m)) in hs.iter().zip(&ms).enumerate() {
            let human = &human_pool[h];
            let machine = &machine_pool[m];
            let he = excerpt(&human.body, None, rng.random())?;
            let me = excerpt(&machine.text, None, rng.random())?;
            let human_position = rng.random_range(0..2usize);
            let excerpts = if human_position == 0 { vec![he, me] } else { vec![me, he] };
            let mut source_ids = vec![human.id.clone()];
            source_ids.extend(machine.source_seed_id.clone());
            tasks.push(AnnotationTask {
                payload: TaskPayload {
                    task_id: format!("turing-{a}-{i}"),
                    annotator: who.clone(),
                    kind: TaskKind::Turing,
                    excerpts,
                    position: i,
                    total: tasks_per_annotator,
                },
                key: TaskKey {
                    generator: machine.generator.as_str().into(),
                    human_position: Some(human_position),
                    auto_score: None,
                    source_ids,
                },
            });
        }
    }
    Ok(tasks)
}

/// Single generated excerpts per annotator, each carrying its hidden
/// automatic score.
pub fn make_bias_tasks(
    generated_pool: &[GeneratedArticle],
    tasks_per_annotator: usize,
    annotators: &[String],
    rng_seed: u64,
) -> Result<Vec<AnnotationTask>> {
    if generated_pool.is_empty() {
        return Err(Error::Empty("bias tasks need a non-empty generated pool".into()));
    }
    if let Some(i) = generated_pool.iter().position(|g| g.score.is_none()) {
        return Err(Error::Argument(format!("generated article {i} in the bias pool has no score")));
    }
    check_annotators(annotators)?;
    let mut tasks = Vec::new();
    for (a, who) in annotators.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &[kind_tag(TaskKind::Bias), a as u64]));
        for (i, g) in draw(&mut rng, generated_pool.len(), tasks_per_annotator).into_iter().enumerate() {
            let item = &generated_pool[g];
            tasks.push(AnnotationTask {
                payload: TaskPayload {
                    task_id: format!("bias-{a}-{i}"),
                    annotator: who.clone(),
                    kind: TaskKind::Bias,
                    excerpts: vec![excerpt(&item.text, None, rng.random())?],
                    position: i,
                    total: tasks_per_annotator,
                },
                key: TaskKey {
                    generator: item.generator.as_str().into(),
                    human_position: None,
                    auto_score: item.score,
                    source_ids: item.source_seed_id.iter().cloned().collect(),
                },
            });
        }
    }
    Ok(tasks)
}

fn check_annotators(annotators: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in annotators {
        if a.trim().is_empty() || !seen.insert(a.as_str()) {
            return Err(Error::Argument(format!("annotator ids must be non-empty and unique, got {a:?}")));
        }
    }
    Ok(())
}

pub fn save_tasks(path: &Path, tasks: &[AnnotationTask]) -> Result<()> {
    io::write_jsonl(path, tasks)
}

pub fn load_tasks(path: &Path) -> Result<Vec<AnnotationTask>> {
    let tasks: Vec<AnnotationTask> = io::read_jsonl(path)?;
    let mut ids = HashSet::new();
    for t in &tasks {
        if !ids.insert(t.id().to_string()) {
            return Err(Error::Format(format!("duplicate task id {:?}", t.id())));
        }
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    A,
    B,
    Left,
    Right,
    CantSay,
}

impl Answer {
    pub fn valid_for(self, kind: TaskKind) -> bool {
        match kind {
            TaskKind::Turing => matches!(self, Answer::A | Answer::B),
            TaskKind::Bias => matches!(self, Answer::Left | Answer::Right | Answer::CantSay),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub task_id: String,
    pub annotator: String,
    pub group: AnnotatorGroup,
    pub answer: Answer,
    pub timestamp: DateTime<Utc>,
}

/// Appends one judgment as a single complete line and syncs it to disk.
pub fn append_judgment(path: &Path, j: &Judgment) -> Result<()> {
    let mut line = serde_json::to_string(j)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    io::read_jsonl(path)
}

/// Checks each judgment against its task: known task, same annotator,
/// answer valid for the kind, one judgment per task.
fn resolve<'t>(judgments: &[Judgment], tasks: &'t [AnnotationTask]) -> Result<Vec<&'t AnnotationTask>> {
    let by_id: HashMap<&str, &AnnotationTask> = tasks.iter().map(|t| (t.id(), t)).collect();
    let mut seen = HashSet::new();
    judgments
        .iter()
        .map(|j| {
            let t = *by_id
                .get(j.task_id.as_str())
                .ok_or_else(|| Error::Contract(format!("judgment for unknown task {:?}", j.task_id)))?;
            if t.payload.annotator != j.annotator {
                return Err(Error::Contract(format!("task {:?} is not assigned to {:?}", j.task_id, j.annotator)));
            }
            if !j.answer.valid_for(t.payload.kind) {
                return Err(Error::Contract(format!("answer {:?} is invalid for task {:?}", j.answer, j.task_id)));
            }
            if !seen.insert(j.task_id.as_str()) {
                return Err(Error::Contract(format!("duplicate judgment for task {:?}", j.task_id)));
            }
            Ok(t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub group: String,
    pub generator: String,
    /// Absent when the cell has no judgments.
    pub rate: Option<f64>,
    pub judgments: usize,
    pub participants: usize,
}

/// Fraction of Turing judgments that picked the machine excerpt as human,
/// per annotator group × generator, including `all` margins.
pub fn selection_rate(judgments: &[Judgment], tasks: &[AnnotationTask]) -> Result<Vec<RateCell>> {
    let resolved = resolve(judgments, tasks)?;
    let mut generators: BTreeSet<String> =
        tasks.iter().filter(|t| t.payload.kind == TaskKind::Turing).map(|t| t.key.generator.clone()).collect();
    generators.insert("all".into());
    let groups = ["native", "nonnative", "all"];
    // (group, generator) -> (machine picks, judgments, annotators)
    let mut cells: BTreeMap<(&str, String), (usize, usize, BTreeSet<&str>)> = BTreeMap::new();
    for (j, t) in judgments.iter().zip(resolved) {
        if t.payload.kind != TaskKind::Turing {
            continue;
        }
        let human =
            t.key.human_position.ok_or_else(|| Error::Contract(format!("turing task {:?} lacks its key", t.id())))?;
        let picked = if j.answer == Answer::A { 0 } else { 1 };
        let fooled = usize::from(picked != human);
        for g in [j.group.as_str(), "all"] {
            for gen in [t.key.generator.as_str(), "all"] {
                let c = cells.entry((g, gen.to_string())).or_default();
                c.0 += fooled;
                c.1 += 1;
                c.2.insert(j.annotator.as_str());
            }
        }
    }
    let mut out = Vec::new();
    for g in groups {
        for gen in &generators {
            let (fooled, n, who) = cells.remove(&(g, gen.clone())).unwrap_or_default();
            out.push(RateCell {
                group: g.into(),
                generator: gen.clone(),
                rate: (n > 0).then(|| fooled as f64 / n as f64),
                judgments: n,
                participants: who.len(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasIdentification {
    pub judgments: usize,
    pub cant_say: usize,
    pub decided_fraction: Option<f64>,
    /// Matches with the automatic side over decided judgments.
    pub correct_fraction: Option<f64>,
    /// Matches over all judgments, counting can't-say as incorrect.
    pub correct_over_all: Option<f64>,
}

pub fn bias_identification(judgments: &[Judgment], tasks: &[AnnotationTask]) -> Result<BiasIdentification> {
    let resolved = resolve(judgments, tasks)?;
    let (mut total, mut cant, mut correct) = (0usize, 0usize, 0usize);
    for (j, t) in judgments.iter().zip(resolved) {
        if t.payload.kind != TaskKind::Bias {
            continue;
        }
        total += 1;
        let auto =
            t.key.auto_score.ok_or_else(|| Error::Contract(format!("bias task {:?} lacks its score", t.id())))?;
        let truth = classify(auto).side;
        match j.answer {
            Answer::CantSay => cant += 1,
            Answer::Left if truth == Side::Left => correct += 1,
            Answer::Right if truth == Side::Right => correct += 1,
            _ => {}
        }
    }
    let decided = total - cant;
    Ok(BiasIdentification {
        judgments: total,
        cant_say: cant,
        decided_fraction: (total > 0).then(|| decided as f64 / total as f64),
        correct_fraction: (decided > 0).then(|| correct as f64 / decided as f64),
        correct_over_all: (total > 0).then(|| correct as f64 / total as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub judgments: usize,
    pub selection_rates: Vec<RateCell>,
    pub bias_identification: BiasIdentification,
}

pub fn metrics_report(judgments: &[Judgment], tasks: &[AnnotationTask]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        judgments: judgments.len(),
        selection_rates: selection_rate(judgments, tasks)?,
        bias_identification: bias_identification(judgments, tasks)?,
    })
}

/// The canonical serialization shared by every consumer of the metrics.
pub fn metrics_json(report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn selection_rate_tsv(cells: &[RateCell]) -> String {
    let mut out = String::from("group\tgenerator\trate\tjudgments\tparticipants\n");
    for c in cells {
        let rate = c.rate.map_or("-".to_string(), |r| format!("{r:.2}"));
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", c.group, c.generator, rate, c.judgments, c.participants));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::SamplingParams;
    use crate::pipeline::Generator;
    use crate::tokenizer::FieldSet;
    use rand::seq::SliceRandom;

    fn text(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag} sentence {i}.")).collect::<Vec<_>>().join(" ")
    }

    fn human(i: usize) -> Article {
        Article {
            id: format!("h{i}"),
            headline: String::new(),
            domain: String::new(),
            authors: vec![],
            date: None,
            body: text(6, &format!("human{i}")),
            bias: None,
        }
    }

    fn machine(i: usize, score: Option<f64>, generator: Generator) -> GeneratedArticle {
        GeneratedArticle {
            source_seed_id: Some(format!("h{i}")),
            generator,
            side_model: None,
            text: text(6, &format!("machine{i}")),
            fields: FieldSet::default(),
            score: score.map(BiasScore::new),
            params: SamplingParams::default(),
        }
    }

    fn ann(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("ann{i}")).collect()
    }

    #[test]
    fn excerpt_rules() {
        assert_eq!(excerpt("One. Two.", None, 1).unwrap(), "One. Two.");
        assert_eq!(excerpt(&text(10, "x"), Some(3), 0).unwrap(), "x sentence 0. x sentence 1. x sentence 2.");
        assert_eq!(excerpt(&text(10, "x"), None, 9).unwrap(), excerpt(&text(10, "x"), None, 9).unwrap());
        assert!(excerpt("", None, 0).is_err());
        assert!(excerpt("a.", Some(5), 0).is_err());
        let lens: HashSet<usize> =
            (0..50).map(|s| split_sentences(&excerpt(&text(10, "x"), None, s).unwrap()).len()).collect();
        assert_eq!(lens, HashSet::from([3, 4]));
    }

    #[test]
    fn turing_tasks_without_replacement() {
        let hp: Vec<Article> = (0..10).map(human).collect();
        let mp: Vec<GeneratedArticle> = (0..10).map(|i| machine(i, None, Generator::Seeded)).collect();
        let tasks = make_turing_tasks(&hp, &mp, 10, &ann(1), 3).unwrap();
        assert_eq!(tasks.len(), 10);
        let humans: HashSet<&str> = tasks.iter().map(|t| t.key.source_ids[0].as_str()).collect();
        assert_eq!(humans.len(), 10);
        assert_eq!(tasks, make_turing_tasks(&hp, &mp, 10, &ann(1), 3).unwrap());
        for t in &tasks {
            let h = t.key.human_position.unwrap();
            assert!(t.payload.excerpts[h].starts_with("human"));
            assert!(t.payload.excerpts[1 - h].starts_with("machine"));
        }
    }

    #[test]
    fn screen_position_balanced() {
        let hp: Vec<Article> = (0..30).map(human).collect();
        let mp: Vec<GeneratedArticle> = (0..30).map(|i| machine(i, None, Generator::Seeded)).collect();
        let tasks = make_turing_tasks(&hp, &mp, 10, &ann(100), 8).unwrap();
        assert_eq!(tasks.len(), 1000);
        let first = tasks.iter().filter(|t| t.key.human_position == Some(0)).count() as f64 / 1000.0;
        assert!((first - 0.5).abs() <= 0.05, "{first}");
    }

    #[test]
    fn bias_tasks_need_scores() {
        let pool: Vec<GeneratedArticle> =
            (0..5).map(|i| machine(i, Some(-3.0 + i as f64), Generator::Fielded)).collect();
        let tasks = make_bias_tasks(&pool, 10, &ann(2), 1).unwrap();
        assert_eq!(tasks.len(), 20);
        assert!(tasks.iter().all(|t| t.key.auto_score.is_some() && t.payload.excerpts.len() == 1));
        let mut bad = pool.clone();
        bad[2].score = None;
        assert!(make_bias_tasks(&bad, 10, &ann(2), 1).is_err());
        let dup = vec!["x".to_string(), "x".to_string()];
        assert!(make_bias_tasks(&pool, 10, &dup, 1).is_err());
    }

    #[test]
    fn payload_has_no_hidden_key() {
        let hp: Vec<Article> = (0..3).map(human).collect();
        let mp: Vec<GeneratedArticle> = (0..3).map(|i| machine(i, Some(-13.0), Generator::Seeded)).collect();
        let mut tasks = make_turing_tasks(&hp, &mp, 3, &ann(1), 0).unwrap();
        tasks.extend(make_bias_tasks(&mp, 3, &ann(1), 0).unwrap());
        for t in &tasks {
            let json = serde_json::to_string(&t.payload).unwrap();
            for hidden in ["human_position", "auto_score", "generator", "source_ids", "-13", "seeded"] {
                assert!(!json.contains(hidden), "{json}");
            }
        }
    }

    fn judgment(task: &AnnotationTask, group: AnnotatorGroup, answer: Answer) -> Judgment {
        Judgment {
            task_id: task.id().into(),
            annotator: task.payload.annotator.clone(),
            group,
            answer,
            timestamp: DateTime::from_timestamp(1_600_000_000, 0).unwrap(),
        }
    }

    #[test]
    fn selection_rate_arithmetic() {
        let hp: Vec<Article> = (0..50).map(human).collect();
        let mp: Vec<GeneratedArticle> = (0..50).map(|i| machine(i, None, Generator::Seeded)).collect();
        let tasks = make_turing_tasks(&hp, &mp, 10, &ann(5), 2).unwrap();
        let mut js: Vec<Judgment> = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let h = t.key.human_position.unwrap();
                let pick = if i < 23 { 1 - h } else { h };
                judgment(t, AnnotatorGroup::Native, if pick == 0 { Answer::A } else { Answer::B })
            })
            .collect();
        let table = selection_rate(&js, &tasks).unwrap();
        let cell = |g: &str, gen: &str| table.iter().find(|c| c.group == g && c.generator == gen).unwrap().clone();
        assert_eq!(cell("native", "seeded").rate, Some(0.46));
        assert_eq!(cell("native", "seeded").participants, 5);
        assert_eq!(cell("nonnative", "seeded").rate, None);
        assert_eq!(cell("all", "all").judgments, 50);
        js.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(selection_rate(&js, &tasks).unwrap(), table);
        assert!(selection_rate_tsv(&table).contains("native\tseeded\t0.46\t50\t5"));
    }

    #[test]
    fn bias_identification_arithmetic() {
        let pool: Vec<GeneratedArticle> = (0..10).map(|i| machine(i, Some(-10.0), Generator::Seeded)).collect();
        let tasks = make_bias_tasks(&pool, 10, &ann(1), 4).unwrap();
        let answers = [
            Answer::CantSay,
            Answer::Left,
            Answer::Left,
            Answer::Left,
            Answer::Left,
            Answer::Left,
            Answer::Left,
            Answer::Right,
            Answer::Right,
            Answer::Right,
        ];
        let js: Vec<Judgment> =
            tasks.iter().zip(answers).map(|(t, a)| judgment(t, AnnotatorGroup::Nonnative, a)).collect();
        let b = bias_identification(&js, &tasks).unwrap();
        assert_eq!(b.decided_fraction, Some(0.9));
        assert_eq!(b.correct_fraction, Some(6.0 / 9.0));
        assert_eq!(b.correct_over_all, Some(0.6));
        assert_eq!(b.decided_fraction.unwrap() + b.cant_say as f64 / b.judgments as f64, 1.0);

        let all_cant: Vec<Judgment> =
            tasks.iter().map(|t| judgment(t, AnnotatorGroup::Native, Answer::CantSay)).collect();
        let b = bias_identification(&all_cant, &tasks).unwrap();
        assert_eq!((b.decided_fraction, b.correct_fraction), (Some(0.0), None));
    }

    #[test]
    fn contract_violations() {
        let pool: Vec<GeneratedArticle> = (0..3).map(|i| machine(i, Some(5.0), Generator::Seeded)).collect();
        let tasks = make_bias_tasks(&pool, 2, &ann(2), 4).unwrap();
        let ok = judgment(&tasks[0], AnnotatorGroup::Native, Answer::Left);
        assert!(metrics_report(&[ok.clone(), ok.clone()], &tasks).is_err());
        assert!(metrics_report(&[Judgment { answer: Answer::A, ..ok.clone() }], &tasks).is_err());
        assert!(metrics_report(&[Judgment { annotator: "ann1".into(), ..ok.clone() }], &tasks).is_err());
        assert!(metrics_report(&[Judgment { task_id: "nope".into(), ..ok }], &tasks).is_err());
    }

    #[test]
    fn log_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.jsonl");
        assert!(read_judgments(&path).unwrap().is_empty());
        let pool: Vec<GeneratedArticle> = (0..3).map(|i| machine(i, Some(5.0), Generator::Seeded)).collect();
        let tasks = make_bias_tasks(&pool, 2, &ann(1), 4).unwrap();
        let js: Vec<Judgment> = tasks.iter().map(|t| judgment(t, AnnotatorGroup::Native, Answer::Right)).collect();
        for j in &js {
            append_judgment(&path, j).unwrap();
        }
        assert_eq!(read_judgments(&path).unwrap(), js);
        let tpath = dir.path().join("tasks.jsonl");
        save_tasks(&tpath, &tasks).unwrap();
        assert_eq!(load_tasks(&tpath).unwrap(), tasks);
        let m = metrics_report(&js, &tasks).unwrap();
        assert_eq!(m.bias_identification.correct_fraction, Some(1.0));
        assert_eq!(metrics_json(&m).unwrap(), metrics_json(&metrics_report(&js, &tasks).unwrap()).unwrap());
    }
}
