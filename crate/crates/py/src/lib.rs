//! Python bindings: article sets, language models, the bias regressor,
//! the generation campaign, detection and annotation metrics.

#![allow(clippy::too_many_arguments)]

use std::path::PathBuf;

use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use newsbias_core::bias::{self, classify, RegressorOptions};
use newsbias_core::corpus::{self, Side, SynthSpec};
use newsbias_core::detection::{self, BenchmarkOptions, DiscriminativeOptions, MachineText};
use newsbias_core::eval;
use newsbias_core::lm::{self, SamplingParams, TrainOptions};
use newsbias_core::pipeline::{self, CampaignConfig, CampaignSeeds, Generator};
use newsbias_core::tokenizer::{build_vocab, join_tokens, tokenize};
use newsbias_core::Error;

pyo3::create_exception!(newsbias, NewsbiasError, PyException);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Argument(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => NewsbiasError::new_err(other.to_string()),
    }
}

trait OrPyErr<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for newsbias_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn parse_side(side: Option<&str>) -> PyResult<Option<Side>> {
    side.map(|s| s.parse::<Side>()).transpose().py()
}

/// Plain Python objects (dicts, lists, numbers) from any serializable value.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| NewsbiasError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn sampling(max_len: usize, temperature: f64, top_k: Option<usize>, seed: u64) -> PyResult<SamplingParams> {
    let p = SamplingParams { max_len, temperature, top_k, rng_seed: seed };
    p.validate().py()?;
    Ok(p)
}

/// An ordered collection of news articles with unique ids.
#[pyclass(module = "newsbias", frozen)]
struct ArticleSet {
    inner: corpus::ArticleSet,
}

#[pymethods]
impl ArticleSet {
    #[staticmethod]
    #[pyo3(signature = (path, label=None))]
    fn load(path: PathBuf, label: Option<&str>) -> PyResult<Self> {
        Ok(Self { inner: corpus::ArticleSet::load(&path, parse_side(label)?).py()? })
    }

    /// Parse JSON lines text.
    #[staticmethod]
    #[pyo3(signature = (text, label=None))]
    fn from_jsonl(text: &str, label: Option<&str>) -> PyResult<Self> {
        let articles = newsbias_core::io::parse_jsonl(text.as_bytes()).py()?;
        Ok(Self { inner: corpus::ArticleSet::new(articles, parse_side(label)?).py()? })
    }

    #[staticmethod]
    #[pyo3(signature = (sets, label=None))]
    fn concat(sets: Vec<PyRef<'_, ArticleSet>>, label: Option<&str>) -> PyResult<Self> {
        let refs: Vec<&corpus::ArticleSet> = sets.iter().map(|s| &s.inner).collect();
        Ok(Self { inner: corpus::ArticleSet::concat(&refs, parse_side(label)?).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    fn to_jsonl(&self) -> PyResult<String> {
        self.inner.to_jsonl().py()
    }

    /// Articles as a list of dicts.
    fn articles(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner.articles())
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().into_iter().map(String::from).collect()
    }

    fn bodies(&self) -> Vec<String> {
        self.inner.iter().map(|a| a.body.clone()).collect()
    }

    #[getter]
    fn label(&self) -> Option<&'static str> {
        self.inner.label().map(Side::as_str)
    }

    /// Seeded split into `(train, test)` with `test_count` test articles.
    #[pyo3(signature = (test_count, seed=0))]
    fn split(&self, test_count: usize, seed: u64) -> PyResult<(ArticleSet, ArticleSet)> {
        let (train, test) = corpus::train_test_split(&self.inner, test_count, seed).py()?;
        Ok((Self { inner: train }, Self { inner: test }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ArticleSet(len={}, label={:?})", self.inner.len(), self.label())
    }
}

/// Synthetic two-sided corpus with planted side terms. Returns
/// `(left, right, spec)` where `spec` lists the planted terms.
#[pyfunction]
#[pyo3(signature = (articles_per_side=500, planted=50, injection_rate=0.2, seed=0))]
fn synth_corpus(
    py: Python<'_>,
    articles_per_side: usize,
    planted: usize,
    injection_rate: f64,
    seed: u64,
) -> PyResult<(ArticleSet, ArticleSet, Py<PyAny>)> {
    let spec = SynthSpec::standard(articles_per_side, planted, injection_rate, seed);
    let (left, right) = corpus::synth_corpus(&spec).py()?;
    Ok((ArticleSet { inner: left }, ArticleSet { inner: right }, to_python(py, &spec)?))
}

/// Kneser-Ney smoothed n-gram model with its vocabulary.
#[pyclass(module = "newsbias", frozen)]
struct LanguageModel {
    inner: lm::LanguageModel,
}

#[pymethods]
impl LanguageModel {
    #[staticmethod]
    #[pyo3(signature = (sets, vocab_from=None, min_count=1, order=lm::DEFAULT_ORDER, discount=lm::DEFAULT_DISCOUNT, fielded=false, side=None))]
    fn train(
        py: Python<'_>,
        sets: Vec<PyRef<'_, ArticleSet>>,
        vocab_from: Option<Vec<PyRef<'_, ArticleSet>>>,
        min_count: u64,
        order: usize,
        discount: f64,
        fielded: bool,
        side: Option<&str>,
    ) -> PyResult<Self> {
        let side = parse_side(side)?;
        let train: Vec<&corpus::ArticleSet> = sets.iter().map(|s| &s.inner).collect();
        let vocab_sets: Vec<&corpus::ArticleSet> = match &vocab_from {
            Some(v) => v.iter().map(|s| &s.inner).collect(),
            None => train.clone(),
        };
        let inner = py
            .detach(|| {
                let vocab = build_vocab(&vocab_sets, min_count)?;
                let articles = train.iter().flat_map(|s| s.iter());
                lm::LanguageModel::train(articles, vocab, TrainOptions { order, discount, fielded }, side)
            })
            .py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: lm::LanguageModel::load(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.model.order()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab.len()
    }

    #[getter]
    fn side(&self) -> Option<&'static str> {
        self.inner.model.side().map(Side::as_str)
    }

    fn perplexity(&self, py: Python<'_>, set: PyRef<'_, ArticleSet>) -> PyResult<f64> {
        let set = &set.inner;
        py.detach(|| self.inner.model.perplexity(&self.inner.encode(set.iter()))).py()
    }

    /// Probability of `word` after the words of `context`.
    fn prob(&self, context: &str, word: &str) -> f64 {
        let ctx = tokenize(context, &self.inner.vocab);
        let w = tokenize(word, &self.inner.vocab);
        self.inner.model.prob(&ctx, w.first().copied().unwrap_or(0))
    }

    /// Continue `prompt` and return prompt plus continuation.
    #[pyo3(signature = (prompt="", max_len=400, temperature=1.0, top_k=Some(40), seed=0))]
    fn sample(
        &self,
        prompt: &str,
        max_len: usize,
        temperature: f64,
        top_k: Option<usize>,
        seed: u64,
    ) -> PyResult<String> {
        let params = sampling(max_len, temperature, top_k, seed)?;
        let prefix = tokenize(prompt, &self.inner.vocab);
        let tokens = lm::sample(&self.inner.model, &prefix, &params).py()?;
        let mut text = prompt.to_string();
        join_tokens(&mut text, tokens[prefix.len()..].iter().map(|&t| self.inner.vocab.token(t)));
        Ok(text)
    }

    /// GLTR rank-bucket fractions of `text` under this model.
    #[pyo3(signature = (text, min_tokens=1))]
    fn gltr(&self, text: &str, min_tokens: usize) -> PyResult<[f64; 4]> {
        detection::gltr_features(&self.inner, text, min_tokens).py()
    }
}

/// TF-IDF ridge regressor mapping text to a bias score in [-42, 42].
#[pyclass(module = "newsbias", frozen)]
struct BiasRegressor {
    inner: bias::BiasRegressor,
}

#[pymethods]
impl BiasRegressor {
    /// Fit on an article set whose articles all carry a bias score.
    /// Returns `(model, report)`.
    #[staticmethod]
    #[pyo3(signature = (set, reg=1e-3, min_df=2, holdout=0.2, seed=0))]
    fn train(
        py: Python<'_>,
        set: PyRef<'_, ArticleSet>,
        reg: f64,
        min_df: usize,
        holdout: f64,
        seed: u64,
    ) -> PyResult<(BiasRegressor, Py<PyAny>)> {
        let opts = RegressorOptions { reg, min_df, holdout, rng_seed: seed };
        let set = &set.inner;
        let (inner, report) = py.detach(|| bias::train_regressor(set, &opts)).py()?;
        Ok((Self { inner }, to_python(py, &report)?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: bias::BiasRegressor::load(&path).py()? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    fn score(&self, text: &str) -> f64 {
        self.inner.score(text).score.value()
    }

    /// `"left"` or `"right"` by the sign of the score.
    fn classify(&self, text: &str) -> &'static str {
        classify(self.inner.score(text).score).side.as_str()
    }
}

/// Words ranked by how much more often they occur in `target` than in
/// `reference`: a list of `(word, ratio, count_target, count_reference)`.
#[pyfunction]
#[pyo3(signature = (target, reference, min_count=bias::DEFAULT_RATIO_MIN_COUNT, alpha=bias::DEFAULT_ALPHA))]
fn discriminativeness_ratio(
    target: PyRef<'_, ArticleSet>,
    reference: PyRef<'_, ArticleSet>,
    min_count: u64,
    alpha: f64,
) -> PyResult<Vec<(String, f64, u64, u64)>> {
    let table = bias::discriminativeness_ratio(&target.inner, &reference.inner, min_count, alpha).py()?;
    Ok(table.entries.into_iter().map(|e| (e.word, e.ratio, e.count_target, e.count_reference)).collect())
}

/// Equal error rate; higher scores mean "machine".
#[pyfunction]
fn eer(scores: Vec<f64>, is_machine: Vec<bool>) -> PyResult<f64> {
    detection::eer(&scores, &is_machine).py()
}

/// Logistic fusion of standardized detector scores.
#[pyclass(module = "newsbias", frozen)]
struct FusionModel {
    inner: detection::FusionModel,
}

#[pymethods]
impl FusionModel {
    #[staticmethod]
    #[pyo3(signature = (detectors, rows, is_machine, l2=detection::DEFAULT_FUSION_L2))]
    fn train(detectors: Vec<String>, rows: Vec<Vec<f64>>, is_machine: Vec<bool>, l2: f64) -> PyResult<Self> {
        Ok(Self { inner: detection::FusionModel::train(&detectors, &rows, &is_machine, l2).py()? })
    }

    fn apply(&self, detectors: Vec<String>, scores: Vec<f64>) -> PyResult<f64> {
        self.inner.apply(&detectors, &scores).py()
    }

    #[getter]
    fn detectors(&self) -> Vec<String> {
        self.inner.detectors().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }
}

/// Human vs machine detection benchmark. `machine` is a list of
/// `(generator, text)` pairs; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (model, human, machine, seed=0, train_fraction=0.7, folds=5, min_tokens=5))]
fn detection_benchmark(
    py: Python<'_>,
    model: PyRef<'_, LanguageModel>,
    human: Vec<String>,
    machine: Vec<(String, String)>,
    seed: u64,
    train_fraction: f64,
    folds: usize,
    min_tokens: usize,
) -> PyResult<Py<PyAny>> {
    let machine: Vec<MachineText> =
        machine.into_iter().map(|(generator, text)| MachineText { generator, text }).collect();
    let opts = BenchmarkOptions {
        rng_seed: seed,
        train_fraction,
        folds,
        discriminative: DiscriminativeOptions { min_tokens, ..Default::default() },
        ..Default::default()
    };
    let lm = &model.inner;
    let report = py.detach(|| detection::detection_benchmark(lm, &human, &machine, &opts)).py()?;
    to_python(py, &report)
}

/// Generate `samples_per_side` articles with each side model from that
/// side's seeds, score them and return `(report, articles)` as plain objects.
#[pyfunction]
#[pyo3(signature = (left_model, right_model, scorer, left_seeds, right_seeds, samples_per_side=5000, seed=0, seed_sentences=2, generator="seeded", max_len=400, temperature=1.0, top_k=Some(40), bin_width=2.0))]
fn run_campaign(
    py: Python<'_>,
    left_model: PyRef<'_, LanguageModel>,
    right_model: PyRef<'_, LanguageModel>,
    scorer: PyRef<'_, BiasRegressor>,
    left_seeds: PyRef<'_, ArticleSet>,
    right_seeds: PyRef<'_, ArticleSet>,
    samples_per_side: usize,
    seed: u64,
    seed_sentences: usize,
    generator: &str,
    max_len: usize,
    temperature: f64,
    top_k: Option<usize>,
    bin_width: f64,
) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let generator = match generator {
        "seeded" => Generator::Seeded,
        "fielded" => Generator::Fielded,
        other => return Err(PyValueError::new_err(format!("unknown generator {other:?}"))),
    };
    let cfg = CampaignConfig {
        samples_per_side,
        seed_sentences,
        generator,
        params: sampling(max_len, temperature, top_k, 0)?,
        rng_seed: seed,
        bin_width,
    };
    let (l, r, reg) = (&left_model.inner, &right_model.inner, &scorer.inner);
    let seeds = CampaignSeeds::by_side(&left_seeds.inner, &right_seeds.inner);
    let out = py.detach(|| pipeline::run_campaign(&cfg, seeds, l, r, reg)).py()?;
    Ok((to_python(py, &out.report)?, to_python(py, &out.articles)?))
}

/// Selection rates and bias identification from a task file and a
/// judgment log, as a dict.
#[pyfunction]
fn annotation_metrics(py: Python<'_>, tasks: PathBuf, log: PathBuf) -> PyResult<Py<PyAny>> {
    let tasks = eval::load_tasks(&tasks).py()?;
    let judgments = eval::read_judgments(&log).py()?;
    to_python(py, &eval::metrics_report(&judgments, &tasks).py()?)
}

#[pymodule]
pub fn newsbias(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NewsbiasError", m.py().get_type::<NewsbiasError>())?;
    m.add_class::<ArticleSet>()?;
    m.add_class::<LanguageModel>()?;
    m.add_class::<BiasRegressor>()?;
    m.add_class::<FusionModel>()?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(discriminativeness_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(eer, m)?)?;
    m.add_function(wrap_pyfunction!(detection_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(annotation_metrics, m)?)?;
    Ok(())
}
