use std::path::{Path, PathBuf};
use std::time::Duration;

use newsbias_core::bias::{
    discriminativeness_ratio, granularity_profile, granularity_tsv, train_regressor, BiasRegressor, RegressorOptions,
    Scorer,
};
use newsbias_core::corpus::{synth_corpus, train_test_split, ArticleSet, ColumnMap, IngestOptions, SynthSpec};
use newsbias_core::detection::{
    detection_benchmark, eer, BenchmarkOptions, DiscriminativeOptions, FusionModel, MachineText,
};
use newsbias_core::eval::{
    load_tasks, make_bias_tasks, make_turing_tasks, metrics_json, metrics_report, read_judgments, save_tasks, TaskKind,
};
use newsbias_core::io::{self, derive_seed};
use newsbias_core::lm::{sample, LanguageModel, NGramModel, TrainOptions};
use newsbias_core::pipeline::{
    generate_fielded, generate_seeded, run_campaign, validate, CampaignConfig, CampaignSeeds, GeneratedArticle,
    Generator,
};
use newsbias_core::tokenizer::{build_vocab, join_tokens, tokenize, FieldName, FieldSet};
use newsbias_service::{ExternalScorer, ExternalScorerConfig, FallbackPolicy, ServeConfig};

use crate::error::{CliError, Result};
use crate::{Cli, Command, ScorerArgs};

fn out_path(out: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    out.clone().ok_or_else(|| CliError::Usage(format!("--out is required ({what})")))
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out_path(out, "an output directory")?;
    std::fs::create_dir_all(&dir).map_err(|e| newsbias_core::Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn load_set(path: &Path) -> Result<ArticleSet> {
    Ok(ArticleSet::load(path, None)?)
}

fn load_sets(paths: &[PathBuf]) -> Result<ArticleSet> {
    let sets = paths.iter().map(|p| load_set(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ArticleSet> = sets.iter().collect();
    Ok(ArticleSet::concat(&refs, None)?)
}

fn load_generated(path: &Path) -> Result<Vec<GeneratedArticle>> {
    Ok(io::read_jsonl(path)?)
}

fn build_scorer(args: &ScorerArgs) -> Result<Box<dyn Scorer>> {
    let builtin = args.scorer.as_deref().map(BiasRegressor::load).transpose()?;
    let Some(url) = &args.external_url else {
        let reg = builtin.ok_or_else(|| CliError::Usage("--scorer or --external-url is required".into()))?;
        return Ok(Box::new(reg));
    };
    if !args.external_timeout.is_finite() || args.external_timeout <= 0.0 {
        return Err(CliError::Usage("--external-timeout must be positive".into()));
    }
    let config = ExternalScorerConfig {
        timeout: Duration::from_secs_f64(args.external_timeout),
        retries: args.external_retries,
        text_field: args.external_text_field.clone(),
        score_field: args.external_score_field.clone(),
        ..ExternalScorerConfig::new(url.clone())
    };
    let fallback = match builtin {
        Some(reg) => FallbackPolicy::Builtin(reg),
        None => FallbackPolicy::Fail,
    };
    Ok(Box::new(ExternalScorer { config, fallback }))
}

fn parse_label(raw: &str, line: usize) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "machine" | "1" | "true" => Ok(true),
        "human" | "0" | "false" => Ok(false),
        other => Err(newsbias_core::Error::Format(format!("line {line}: label {other:?} is not machine/human")).into()),
    }
}

/// A headed tab-separated table of numbers plus an optional `label` column.
struct ScoreTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<bool>>,
}

fn read_score_table(path: &Path) -> Result<ScoreTable> {
    let text = io::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) =
        lines.next().ok_or_else(|| newsbias_core::Error::Empty(format!("{} is empty", path.display())))?;
    let header: Vec<&str> = header.split('\t').map(str::trim).collect();
    let label_col = header.iter().position(|&h| h == "label");
    let columns: Vec<String> =
        header.iter().enumerate().filter(|&(i, _)| Some(i) != label_col).map(|(_, h)| h.to_string()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err(
                newsbias_core::Error::Format(format!("line {}: expected {} columns", n + 1, header.len())).into()
            );
        }
        let mut row = Vec::with_capacity(columns.len());
        for (i, c) in cells.iter().enumerate() {
            if Some(i) == label_col {
                labels.push(parse_label(c, n + 1)?);
            } else {
                row.push(c.trim().parse::<f64>().map_err(|e| {
                    newsbias_core::Error::Format(format!("line {}: {:?} is not a number: {e}", n + 1, c))
                })?);
            }
        }
        rows.push(row);
    }
    Ok(ScoreTable { columns, rows, labels: label_col.map(|_| labels) })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(io::write_atomic_str(path, text)?)
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let out = &cli.out;
    match cli.command {
        Command::Ingest {
            input,
            label,
            delimiter,
            author_delimiter,
            col_id,
            col_headline,
            col_domain,
            col_authors,
            col_date,
            col_body,
        } => {
            if !delimiter.is_ascii() {
                return Err(CliError::Usage("--delimiter must be a single ASCII character".into()));
            }
            let opts = IngestOptions {
                columns: ColumnMap {
                    id: (col_id != "none").then_some(col_id),
                    headline: col_headline,
                    domain: col_domain,
                    authors: col_authors,
                    date: col_date,
                    body: col_body,
                },
                delimiter: delimiter as u8,
                author_delimiter,
                label,
            };
            let report = newsbias_core::corpus::ingest_csv(&input, &opts)?;
            report.set.save(&out_path(out, "article set")?)?;
            println!(
                "ingested {} articles ({} empty bodies skipped, {} unparsed dates)",
                report.set.len(),
                report.skipped_empty,
                report.unparsed_dates
            );
        }
        Command::Synth { articles_per_side, planted, injection_rate } => {
            let spec = SynthSpec::standard(articles_per_side, planted, injection_rate, seed);
            let (left, right) = synth_corpus(&spec)?;
            let dir = out_dir(out)?;
            left.save(&dir.join("left.jsonl"))?;
            right.save(&dir.join("right.jsonl"))?;
            io::write_json_pretty(&dir.join("spec.json"), &spec)?;
            println!("wrote {} left and {} right articles to {}", left.len(), right.len(), dir.display());
        }
        Command::Split { input, test_fraction, test_count } => {
            let set = load_set(&input)?;
            if !(0.0..1.0).contains(&test_fraction) {
                return Err(CliError::Usage("--test-fraction must be in [0, 1)".into()));
            }
            let n = test_count.unwrap_or_else(|| (set.len() as f64 * test_fraction).round() as usize);
            let (train, test) = train_test_split(&set, n, seed)?;
            let dir = out_dir(out)?;
            train.save(&dir.join("train.jsonl"))?;
            test.save(&dir.join("test.jsonl"))?;
            println!("train {} / test {}", train.len(), test.len());
        }
        Command::TrainLm { input, vocab_from, min_count, order, discount, fielded, side } => {
            let set = load_sets(&input)?;
            let vocab_set = if vocab_from.is_empty() { set.clone() } else { load_sets(&vocab_from)? };
            let vocab = build_vocab(&[&vocab_set], min_count)?;
            let lm = LanguageModel::train(set.iter(), vocab, TrainOptions { order, discount, fielded }, side)?;
            lm.save(&out_path(out, "model file")?)?;
            println!("trained order-{order} model on {} articles, vocabulary {} tokens", set.len(), lm.vocab.len());
        }
        Command::Perplexity { model, input, uniform_vocab } => {
            let ppl = match uniform_vocab {
                Some(n) => {
                    if n == 0 {
                        return Err(CliError::Usage("--uniform-vocab must be positive".into()));
                    }
                    NGramModel::uniform(n).perplexity(&[(0..n as u32).collect()])?
                }
                None => {
                    let lm = LanguageModel::load(model.as_deref().expect("clap requires --model"))?;
                    let set = load_set(input.as_deref().expect("clap requires --input"))?;
                    lm.model.perplexity(&lm.encode(set.iter()))?
                }
            };
            println!("{ppl:.6}");
        }
        Command::Sample { model, prompt, sampling } => {
            let lm = LanguageModel::load(&model)?;
            let prefix = tokenize(&prompt, &lm.vocab);
            let tokens = sample(&lm.model, &prefix, &sampling.params(seed))?;
            let mut text = prompt;
            join_tokens(&mut text, tokens[prefix.len()..].iter().map(|&t| lm.vocab.token(t)));
            if let Some(path) = out {
                write_text(path, &format!("{text}\n"))?;
            }
            println!("{text}");
        }
        Command::Generate { model, seeds, count, generator, seed_sentences, scorer, sampling } => {
            let lm = LanguageModel::load(&model)?;
            let seeds = load_set(&seeds)?;
            if seeds.is_empty() {
                return Err(newsbias_core::Error::Empty("seed set is empty".into()).into());
            }
            let mut generated = Vec::with_capacity(count);
            for i in 0..count {
                let s = &seeds.articles()[i % seeds.len()];
                let params = sampling.params(derive_seed(seed, &[i as u64]));
                let g = match generator {
                    Generator::Seeded => generate_seeded(&lm, s, seed_sentences, &params)?,
                    Generator::Fielded => {
                        let mut g = generate_fielded(&lm, &FieldSet::from_article(s, FieldName::Body), &params)?;
                        g.source_seed_id = Some(s.id.clone());
                        g
                    }
                };
                generated.push(g);
            }
            let dir = out_dir(out)?;
            match scorer {
                Some(path) => {
                    let reg = BiasRegressor::load(&path)?;
                    let v = validate(&reg, generated)?;
                    io::write_jsonl(&dir.join("left.jsonl"), &v.left)?;
                    io::write_jsonl(&dir.join("right.jsonl"), &v.right)?;
                    let all: Vec<&GeneratedArticle> = v.left.iter().chain(&v.right).collect();
                    io::write_jsonl(&dir.join("generated.jsonl"), &all)?;
                    println!("generated {count} articles: {} left, {} right", v.left.len(), v.right.len());
                }
                None => {
                    io::write_jsonl(&dir.join("generated.jsonl"), &generated)?;
                    println!("generated {count} articles");
                }
            }
        }
        Command::Ratio { target, reference, min_count, alpha, show } => {
            let table = discriminativeness_ratio(&load_set(&target)?, &load_set(&reference)?, min_count, alpha)?;
            if let Some(path) = out {
                write_text(path, &table.to_tsv())?;
            }
            let n = table.entries.len();
            println!("{n} words (min count {min_count}, alpha {alpha})");
            let shown: Vec<usize> =
                if n <= 2 * show { (0..n).collect() } else { (0..show).chain(n - show..n).collect() };
            for (k, &i) in shown.iter().enumerate() {
                if k == show && n > 2 * show {
                    println!("...");
                }
                let e = &table.entries[i];
                println!("{}\t{:.4}\t{}\t{}", e.word, e.ratio, e.count_target, e.count_reference);
            }
        }
        Command::TrainScorer { input, reg, min_df, holdout } => {
            let set = load_sets(&input)?;
            let opts = RegressorOptions { reg, min_df, holdout, rng_seed: seed };
            let (model, report) = train_regressor(&set, &opts)?;
            model.save(&out_path(out, "regressor file")?)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(newsbias_core::Error::from)?);
        }
        Command::Score { scorer, text, input } => {
            let scorer = build_scorer(&scorer)?;
            match (text, input) {
                (Some(t), _) => {
                    let o = scorer.score_text(&t)?;
                    let mut line = format!("{}", o.score);
                    if o.clamped {
                        line.push_str(" (clamped)");
                    }
                    if o.empty_text {
                        line.push_str(" (empty text)");
                    }
                    println!("{line}");
                }
                (None, Some(path)) => {
                    let set = load_set(&path)?;
                    let mut articles = set.into_articles();
                    let mut total = 0.0;
                    for a in &mut articles {
                        let o = scorer.score_text(&a.body)?;
                        total += o.score.abs();
                        a.bias = Some(o.score);
                    }
                    let n = articles.len();
                    ArticleSet::new(articles, None)?.save(&out_path(out, "scored article set")?)?;
                    println!("scored {n} articles, mean |score| {:.2}", if n > 0 { total / n as f64 } else { 0.0 });
                }
                (None, None) => return Err(CliError::Usage("give --text or --input".into())),
            }
        }
        Command::Granularity { scorer, input } => {
            let scorer = build_scorer(&scorer)?;
            let rows = granularity_profile(scorer.as_ref(), &load_set(&input)?)?;
            let tsv = granularity_tsv(&rows);
            if let Some(path) = out {
                write_text(path, &tsv)?;
            }
            print!("{tsv}");
        }
        Command::Campaign {
            left_model,
            right_model,
            scorer,
            seeds,
            left_seeds,
            right_seeds,
            samples_per_side,
            seed_sentences,
            generator,
            bin_width,
            sampling,
        } => {
            let left = LanguageModel::load(&left_model)?;
            let right = LanguageModel::load(&right_model)?;
            let reg = BiasRegressor::load(&scorer)?;
            let (l, r) = match (seeds, left_seeds, right_seeds) {
                (Some(s), _, _) => {
                    let s = load_set(&s)?;
                    (s.clone(), s)
                }
                (None, Some(l), Some(r)) => (load_set(&l)?, load_set(&r)?),
                _ => return Err(CliError::Usage("give --seeds or both --left-seeds and --right-seeds".into())),
            };
            let cfg = CampaignConfig {
                samples_per_side,
                seed_sentences,
                generator,
                params: sampling.params(0),
                rng_seed: seed,
                bin_width,
            };
            let result = run_campaign(&cfg, CampaignSeeds::by_side(&l, &r), &left, &right, &reg)?;
            let dir = out_dir(out)?;
            let report = &result.report;
            io::write_json_pretty(&dir.join("report.json"), report)?;
            write_text(&dir.join("seed_histogram.tsv"), &report.seed_histogram_tsv()?)?;
            write_text(&dir.join("generated_histogram.tsv"), &report.generated_histogram_tsv()?)?;
            io::write_jsonl(&dir.join("generated.jsonl"), &result.articles)?;
            for s in &report.sides {
                println!(
                    "{}: {} samples, mean |score| seeds {:.2} generated {:.2}, agreement {}",
                    s.side,
                    s.samples,
                    s.seed_mean_abs,
                    s.generated_mean_abs,
                    s.agreement.map_or("-".into(), |a| format!("{a:.3}"))
                );
            }
        }
        Command::Detect { model, human, machine, train_fraction, folds, min_tokens } => {
            let lm = LanguageModel::load(&model)?;
            let human: Vec<String> = load_set(&human)?.iter().map(|a| a.body.clone()).collect();
            let mut texts = Vec::new();
            for path in &machine {
                texts.extend(
                    load_generated(path)?
                        .into_iter()
                        .map(|g| MachineText { generator: g.generator.as_str().to_string(), text: g.text }),
                );
            }
            let opts = BenchmarkOptions {
                rng_seed: seed,
                train_fraction,
                folds,
                discriminative: DiscriminativeOptions { min_tokens, ..Default::default() },
                ..Default::default()
            };
            let report = detection_benchmark(&lm, &human, &texts, &opts)?;
            let tsv = report.to_tsv();
            if out.is_some() {
                let dir = out_dir(out)?;
                write_text(&dir.join("detection.tsv"), &tsv)?;
                io::write_json_pretty(&dir.join("detection.json"), &report)?;
            }
            print!("{tsv}");
        }
        Command::Eer { input, score_column } => {
            let table = read_score_table(&input)?;
            let col = table
                .columns
                .iter()
                .position(|c| *c == score_column)
                .ok_or_else(|| newsbias_core::Error::Format(format!("no column {score_column:?}")))?;
            let labels = table.labels.ok_or_else(|| newsbias_core::Error::Format("no label column".into()))?;
            let scores: Vec<f64> = table.rows.iter().map(|r| r[col]).collect();
            println!("{:.6}", eer(&scores, &labels)?);
        }
        Command::Fuse { input, model, l2 } => {
            let table = read_score_table(&input)?;
            let fusion = match &model {
                Some(path) => io::read_json::<FusionModel>(path)?,
                None => {
                    let labels =
                        table.labels.as_ref().ok_or_else(|| newsbias_core::Error::Format("no label column".into()))?;
                    let f = FusionModel::train(&table.columns, &table.rows, labels, l2)?;
                    io::write_json_pretty(&out_path(out, "fusion model file")?, &f)?;
                    f
                }
            };
            let fused: Vec<f64> =
                table.rows.iter().map(|r| fusion.apply(&table.columns, r)).collect::<Result<_, _>>()?;
            if let Some(labels) = &table.labels {
                println!("fused EER {:.6} over {} rows", eer(&fused, labels)?, fused.len());
            }
            if model.is_some() {
                let mut tsv = String::from("fused\n");
                for f in &fused {
                    tsv.push_str(&format!("{f:.6}\n"));
                }
                match out {
                    Some(path) => write_text(path, &tsv)?,
                    None => print!("{tsv}"),
                }
            }
        }
        Command::MakeTasks { human, generated, annotators, per_annotator, kind } => {
            let pool = load_generated(&generated)?;
            let mut tasks = Vec::new();
            for k in kind.kinds() {
                match k {
                    TaskKind::Turing => {
                        let human = load_set(human.as_deref().expect("clap requires --human"))?;
                        tasks.extend(make_turing_tasks(human.articles(), &pool, per_annotator, &annotators, seed)?);
                    }
                    TaskKind::Bias => tasks.extend(make_bias_tasks(&pool, per_annotator, &annotators, seed)?),
                }
            }
            save_tasks(&out_path(out, "tasks file")?, &tasks)?;
            println!("{} tasks for {} annotators", tasks.len(), annotators.len());
        }
        Command::Metrics { tasks, log } => {
            let tasks = load_tasks(&tasks)?;
            let json = metrics_json(&metrics_report(&read_judgments(&log)?, &tasks)?)?;
            if let Some(path) = out {
                write_text(path, &json)?;
            }
            println!("{json}");
        }
        Command::Serve { tasks, log, static_dir, addr } => {
            let runtime = tokio::runtime::Runtime::new().map_err(newsbias_service::ServiceError::from)?;
            runtime.block_on(newsbias_service::serve(ServeConfig { tasks, log, static_dir, addr }))?;
        }
    }
    Ok(())
}
