use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{apply_param, ExperimentConfig, Method};
use super::{rerank, ExperimentError, Result};
use crate::corpus_io::{
    load_corpus, load_qrels, load_topics, read_run, write_run, DocStore, Qrels, RunList, Topic,
};
use crate::eval::{
    compare, evaluate, reports_to_json, reports_to_tsv, ComparisonTable, EvalError, EvalReport,
    MetricSpec, RunReports,
};
use crate::index::{
    build_index, load_index_checked, retrieve, save_index, PostingsIndex, WeightedQuery, INDEX_FILE,
};
use crate::llm::{write_transcript, Generator, ResponseCache, TranscriptRecord};
use crate::prf::{
    rm3_expand, select_feedback, select_oracle_feedback, FeedbackSet, FeedbackSource,
};
use crate::reformulate::{
    flan_qr, genqr_ensemble, genqr_ensemble_rf, paraphrase_instructions, write_reformulations,
    FeedbackMode, InstructionSet, Provenance, Reformulation,
};

pub const RUN_FILE: &str = "run.trec";
pub const REFORMULATIONS_FILE: &str = "reformulations.jsonl";
pub const FAILURES_FILE: &str = "failures.tsv";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexOutcome {
    pub path: PathBuf,
    /// False when a compatible index already existed.
    pub built: bool,
    pub num_docs: usize,
    pub num_terms: usize,
}

/// Builds the index unless one with the same analyzer already exists. An
/// index built with a different analyzer is an error unless `force` is set.
pub fn cmd_index(config: &ExperimentConfig, force: bool) -> Result<IndexOutcome> {
    let dir = &config.data.index;
    let (index, built) = if !force && dir.join(INDEX_FILE).exists() {
        (load_index_checked(dir, &config.analyzer)?, false)
    } else {
        let corpus = load_corpus(&config.data.corpus, config.data.corpus_format)?;
        let index = build_index(corpus, config.analyzer.clone())?;
        save_index(&index, dir)?;
        log::info!(
            "indexed {} documents into {}",
            index.num_docs(),
            dir.display()
        );
        (index, true)
    };
    Ok(IndexOutcome {
        path: dir.clone(),
        built,
        num_docs: index.num_docs(),
        num_terms: index.num_terms(),
    })
}

fn build_generator(config: &ExperimentConfig) -> Result<Generator> {
    let backend = config
        .backend
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no [backend] configured".into()))?
        .build(Path::new("."))?;
    let mut generator = Generator::new(backend).with_max_in_flight(config.max_in_flight);
    if let Some(dir) = &config.cache {
        generator = generator.with_cache(ResponseCache::open(dir)?);
    }
    Ok(generator)
}

fn load_instructions(config: &ExperimentConfig) -> Result<InstructionSet> {
    Ok(match &config.instructions {
        Some(p) => InstructionSet::load(p)?,
        None => InstructionSet::bundled(),
    })
}

/// Resources shared by every run of one experiment family.
struct Workspace {
    index: PostingsIndex,
    topics: Vec<Topic>,
    qrels: Option<Qrels>,
    store: Option<DocStore>,
    generator: Option<Generator>,
    instructions: InstructionSet,
}

impl Workspace {
    fn open(config: &ExperimentConfig) -> Result<Self> {
        let dir = &config.data.index;
        if !dir.join(INDEX_FILE).exists() {
            return Err(ExperimentError::Config(format!(
                "no index at {}; run the `index` command first",
                dir.display()
            )));
        }
        let index = load_index_checked(dir, &config.analyzer)?;
        let topics = load_topics(&config.data.topics, config.data.topic_format)?;
        let qrels = config.data.qrels.as_ref().map(load_qrels).transpose()?;
        let needs_store = config.method.uses_context()
            || config.method == Method::Rm3
            || config.reranker.is_some()
            || config.sweep.is_some();
        let store = if needs_store {
            Some(DocStore::load(
                &config.data.corpus,
                config.data.corpus_format,
            )?)
        } else {
            None
        };
        let generator = if config.method.uses_llm() {
            Some(build_generator(config)?)
        } else {
            None
        };
        Ok(Self {
            index,
            topics,
            qrels,
            store,
            generator,
            instructions: load_instructions(config)?,
        })
    }

    fn generator(&self) -> Result<&Generator> {
        self.generator
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("method needs a backend".into()))
    }

    fn store(&self) -> &DocStore {
        self.store
            .as_ref()
            .expect("document store loaded for feedback methods")
    }

    fn feedback(
        &self,
        config: &ExperimentConfig,
        query: &WeightedQuery,
        mode: FeedbackMode,
        m: usize,
    ) -> Result<FeedbackSet> {
        if m == 0 {
            return Ok(FeedbackSet::empty(
                query.qid.clone(),
                FeedbackSource::Pseudo,
            ));
        }
        Ok(match mode {
            FeedbackMode::Oracle => {
                let qrels = self
                    .qrels
                    .as_ref()
                    .ok_or_else(|| ExperimentError::Config("oracle feedback needs qrels".into()))?;
                select_oracle_feedback(qrels, self.store(), &query.qid, m)?
            }
            _ => {
                let first = retrieve(&self.index, query, m, config.bm25)?;
                select_feedback(&first, self.store(), m)?
            }
        })
    }

    fn process(
        &self,
        config: &ExperimentConfig,
        topic: &Topic,
    ) -> Result<(RunList, Reformulation)> {
        let analyzer = self.index.analyzer();
        let raw = WeightedQuery::from_text(topic.qid.clone(), &topic.query, analyzer);
        let rc = &config.reformulation;
        let plain = |fused: WeightedQuery, method: &str| Reformulation {
            qid: topic.qid.clone(),
            original: topic.query.clone(),
            keywords: Vec::new(),
            fused,
            provenance: Provenance {
                method: method.to_string(),
                ..Provenance::default()
            },
        };
        let reformulation = match config.method {
            Method::Raw => plain(raw.clone(), "raw"),
            Method::Flanqr => flan_qr(
                self.generator()?,
                self.instructions.base(),
                topic,
                rc,
                analyzer,
            )?,
            Method::Genqrensemble => {
                genqr_ensemble(self.generator()?, &self.instructions, topic, rc, analyzer)?
            }
            Method::Flanprf | Method::GenqrensembleRf => {
                let fb = self.feedback(config, &raw, rc.feedback, rc.m)?;
                let mut rc = rc.clone();
                if config.method == Method::Flanprf {
                    rc.n = Some(1);
                }
                genqr_ensemble_rf(
                    self.generator()?,
                    &self.instructions,
                    topic,
                    &fb,
                    &rc,
                    analyzer,
                )?
            }
            Method::Rm3 => {
                let fb = self.feedback(config, &raw, rc.feedback, config.rm3.fb_docs)?;
                if fb.is_empty() {
                    plain(raw.clone(), "rm3")
                } else {
                    let mut r = plain(rm3_expand(&self.index, &raw, &fb, config.rm3)?, "rm3");
                    r.provenance.feedback_docnos =
                        fb.docs.iter().map(|d| d.docno.clone()).collect();
                    r
                }
            }
        };
        let mut run = retrieve(&self.index, &reformulation.fused, config.depth, config.bm25)?;
        run.tag = config.tag();
        Ok((run, reformulation))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryFailure {
    pub qid: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_path: PathBuf,
    pub reformulations_path: PathBuf,
    pub runs: Vec<RunList>,
    pub reformulations: Vec<Reformulation>,
    /// Queries that failed under `lenient`; they are absent from the run.
    pub failures: Vec<QueryFailure>,
    pub backend_calls: u64,
    pub cache_hits: u64,
}

fn run_in(ws: &Workspace, config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let calls_before = ws.generator.as_ref().map_or(0, Generator::backend_calls);
    let hits_before = ws
        .generator
        .as_ref()
        .and_then(Generator::cache)
        .map_or(0, ResponseCache::hits);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<(RunList, Reformulation)>> = pool.install(|| {
        ws.topics
            .par_iter()
            .map(|t| ws.process(config, t))
            .collect()
    });

    let mut runs = Vec::new();
    let mut reformulations = Vec::new();
    let mut failures = Vec::new();
    for (topic, result) in ws.topics.iter().zip(results) {
        match result {
            Ok((run, r)) => {
                runs.push(run);
                reformulations.push(r);
            }
            Err(e) if config.lenient => {
                log::warn!("query {} failed: {e}", topic.qid);
                failures.push(QueryFailure {
                    qid: topic.qid.clone(),
                    error: e.to_string(),
                });
            }
            Err(e) => {
                return Err(ExperimentError::Query {
                    qid: topic.qid.clone(),
                    source: Box::new(e),
                })
            }
        }
    }

    if let Some(rr) = &config.reranker {
        let queries: HashMap<String, String> = ws
            .topics
            .iter()
            .map(|t| (t.qid.clone(), t.query.clone()))
            .collect();
        rerank::rerank(&mut runs, &queries, ws.store(), rr, out_dir)?;
    }

    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let run_path = out_dir.join(RUN_FILE);
    write_run(&runs, &run_path)?;
    let reformulations_path = out_dir.join(REFORMULATIONS_FILE);
    let file = std::fs::File::create(&reformulations_path)
        .map_err(|e| ExperimentError::io(&reformulations_path, e))?;
    write_reformulations(&reformulations, std::io::BufWriter::new(file))
        .map_err(|e| ExperimentError::io(&reformulations_path, e))?;

    let failures_path = out_dir.join(FAILURES_FILE);
    if failures.is_empty() {
        let _ = std::fs::remove_file(&failures_path);
    } else {
        let body: String = failures
            .iter()
            .map(|f| format!("{}\t{}\n", f.qid, f.error.replace(['\t', '\n'], " ")))
            .collect();
        std::fs::write(&failures_path, body).map_err(|e| ExperimentError::io(&failures_path, e))?;
    }

    if let Some(path) = &config.record_transcript {
        let records: Vec<TranscriptRecord> = reformulations
            .iter()
            .flat_map(|r| {
                r.provenance
                    .prompts
                    .iter()
                    .zip(&r.keywords)
                    .map(|(p, k)| TranscriptRecord::new(p.clone(), k.clone()))
            })
            .collect();
        write_transcript(&records, path)?;
    }

    let generator = ws.generator.as_ref();
    Ok(RunOutcome {
        run_path,
        reformulations_path,
        runs,
        reformulations,
        failures,
        backend_calls: generator.map_or(0, Generator::backend_calls) - calls_before,
        cache_hits: generator
            .and_then(Generator::cache)
            .map_or(0, ResponseCache::hits)
            - hits_before,
    })
}

/// Runs the configured method over every topic and writes
/// [`RUN_FILE`] and [`REFORMULATIONS_FILE`] to the output directory.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let ws = Workspace::open(config)?;
    run_in(&ws, config, &config.output)
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub runs: Vec<RunReports>,
    pub table: ComparisonTable,
}

fn run_name(runs: &[RunList], path: &Path) -> String {
    runs.first()
        .map(|r| r.tag.clone())
        .filter(|t| !t.is_empty())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into())
        })
}

fn evaluate_all(
    runs: &[RunList],
    qrels: &Qrels,
    metrics: &[MetricSpec],
) -> Result<Vec<EvalReport>> {
    Ok(metrics
        .par_iter()
        .map(|m| evaluate(runs, qrels, *m))
        .collect::<Result<Vec<_>, EvalError>>()?)
}

/// Evaluates each run file and compares all of them against the first.
/// With `out_dir`, writes `<name>.eval.tsv`, `<name>.eval.json` and
/// `comparison.tsv` there; names come from run tags.
pub fn cmd_eval(
    run_paths: &[PathBuf],
    qrels: &Path,
    metrics: &[MetricSpec],
    alpha: f64,
    out_dir: Option<&Path>,
) -> Result<EvalOutcome> {
    if run_paths.is_empty() {
        return Err(ExperimentError::Config("no run files given".into()));
    }
    let qrels = load_qrels(qrels)?;
    let mut all = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for path in run_paths {
        let runs = read_run(path)?;
        let mut name = run_name(&runs, path);
        let n = seen.entry(name.clone()).or_default();
        *n += 1;
        if *n > 1 {
            name = format!("{name}#{n}");
        }
        all.push(RunReports::new(name, evaluate_all(&runs, &qrels, metrics)?));
    }
    let table = compare(&all[0], &all[1..], alpha)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
        let write = |name: String, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| ExperimentError::io(&p, e))
        };
        for r in &all {
            write(format!("{}.eval.tsv", r.name), reports_to_tsv(&r.reports))?;
            write(format!("{}.eval.json", r.name), reports_to_json(&r.reports))?;
        }
        write("comparison.tsv".into(), table.to_tsv())?;
    }
    Ok(EvalOutcome { runs: all, table })
}

/// Per-query CSV `qid,value_a,value_b,delta` (delta = b − a), ascending by
/// delta. Both runs must cover the same queries.
pub fn cmd_querywise(
    run_a: &Path,
    run_b: &Path,
    qrels: &Path,
    metric: MetricSpec,
) -> Result<String> {
    let qrels = load_qrels(qrels)?;
    let a = read_run(run_a)?;
    let b = read_run(run_b)?;
    let qa: BTreeSet<&str> = a.iter().map(|r| r.qid.as_str()).collect();
    let qb: BTreeSet<&str> = b.iter().map(|r| r.qid.as_str()).collect();
    if qa != qb {
        return Err(EvalError::MismatchedQids {
            only_a: qa.difference(&qb).map(|s| s.to_string()).collect(),
            only_b: qb.difference(&qa).map(|s| s.to_string()).collect(),
        }
        .into());
    }
    let ra = evaluate(&a, &qrels, metric)?;
    let rb = evaluate(&b, &qrels, metric)?;
    let mut rows: Vec<(&String, f64, f64)> = ra
        .per_query
        .iter()
        .filter(|(q, _)| qa.contains(q.as_str()))
        .map(|(q, va)| (q, *va, rb.per_query[q]))
        .collect();
    rows.sort_by(|x, y| {
        (x.2 - x.1)
            .total_cmp(&(y.2 - y.1))
            .then_with(|| x.0.cmp(y.0))
    });
    let mut out = String::from("qid,value_a,value_b,delta\n");
    for (q, va, vb) in rows {
        let _ = writeln!(out, "{q},{va:.6},{vb:.6},{:.6}", vb - va);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub param: String,
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
    pub runs: Vec<RunOutcome>,
    pub backend_calls: u64,
}

/// Runs the `[sweep]` grid: one run per value in `<output>/<param>=<value>`,
/// each evaluated on every configured metric, and a long-format
/// `param,value,metric,score` CSV in [`SWEEP_FILE`]. Index, documents and
/// the response cache are shared across values.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no [sweep] section".into()))?;
    let ws = Workspace::open(config)?;
    let qrels = ws
        .qrels
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("sweeps need data.qrels".into()))?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut csv = String::from("param,value,metric,score\n");
    for &v in &spec.values {
        let mut c = config.clone();
        apply_param(&mut c, &spec.param, v)?;
        c.validate()?;
        let dir = config.output.join(format!("{}={v}", spec.param));
        let outcome = run_in(&ws, &c, &dir)?;
        for report in evaluate_all(&outcome.runs, qrels, &config.metrics)? {
            let _ = writeln!(
                csv,
                "{},{v},{},{:.6}",
                spec.param, report.metric, report.mean
            );
            rows.push(SweepRow {
                value: v,
                metric: report.metric.to_string(),
                score: report.mean,
            });
        }
        runs.push(outcome);
    }
    std::fs::create_dir_all(&config.output).map_err(|e| ExperimentError::io(&config.output, e))?;
    let csv_path = config.output.join(SWEEP_FILE);
    std::fs::write(&csv_path, csv).map_err(|e| ExperimentError::io(&csv_path, e))?;
    Ok(SweepOutcome {
        param: spec.param.clone(),
        backend_calls: runs.iter().map(|r| r.backend_calls).sum(),
        rows,
        csv_path,
        runs,
    })
}

/// Generates `count` instructions from `base` (the bundled base instruction
/// when `None`) and saves them one per line to `out`.
pub fn cmd_paraphrase(
    config: &ExperimentConfig,
    base: Option<&str>,
    count: usize,
    out: &Path,
) -> Result<InstructionSet> {
    let bundled = InstructionSet::bundled();
    let base = base.unwrap_or(bundled.base());
    let generator = build_generator(config)?;
    let set = paraphrase_instructions(&generator, base, count, &config.reformulation)?;
    set.save(out)?;
    Ok(set)
}
