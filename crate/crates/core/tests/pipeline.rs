//! End-to-end behaviour of the experiment commands on the toy benchmark.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use genqr::corpus_io::{load_topics, read_run};
use genqr::experiment::{
    cmd_eval, cmd_index, cmd_paraphrase, cmd_querywise, cmd_run, cmd_sweep, ExperimentConfig,
    ExperimentError, Method, FAILURES_FILE, REFORMULATIONS_FILE, RUN_FILE, SWEEP_FILE,
};
use genqr::index::{load_index, Stemmer};
use genqr::llm::{write_transcript, BackendConfig, TranscriptRecord};
use genqr::reformulate::{read_reformulations, FeedbackMode};
use genqr::{retrieve, Bm25Params, MetricSpec, WeightedQuery};

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy")
}

fn config(root: &Path, file: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::load(toy().join(file)).unwrap();
    c.data.index = root.join("index");
    c.cache = Some(root.join("cache"));
    c.output = root.join("out");
    cmd_index(&c, false).unwrap();
    c
}

#[test]
fn index_is_idempotent_and_checks_the_analyzer() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::load(toy().join("experiment.toml")).unwrap();
    c.data.index = tmp.path().join("index");
    let first = cmd_index(&c, false).unwrap();
    assert!(first.built);
    assert_eq!(first.num_docs, 50);
    let second = cmd_index(&c, false).unwrap();
    assert!(!second.built);
    assert_eq!(second.num_terms, first.num_terms);

    c.analyzer.stemmer = Stemmer::Porter;
    assert!(cmd_index(&c, false).is_err());
    c.method = Method::Raw;
    assert!(cmd_run(&c).is_err());
    assert!(cmd_index(&c, true).unwrap().built);
    assert_eq!(
        load_index(&c.data.index).unwrap().analyzer().stemmer,
        Stemmer::Porter
    );
}

#[test]
fn run_without_index_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::load(toy().join("experiment.toml")).unwrap();
    c.data.index = tmp.path().join("missing");
    c.method = Method::Raw;
    assert!(matches!(cmd_run(&c), Err(ExperimentError::Config(_))));
}

#[test]
fn raw_method_matches_direct_retrieval() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), "experiment.toml");
    c.method = Method::Raw;
    let out = cmd_run(&c).unwrap();
    assert_eq!(out.backend_calls, 0);

    let index = load_index(&c.data.index).unwrap();
    let topics = load_topics(&c.data.topics, c.data.topic_format).unwrap();
    let from_file = read_run(&out.run_path).unwrap();
    assert_eq!(from_file.len(), topics.len());
    for (topic, run) in topics.iter().zip(&from_file) {
        let q = WeightedQuery::from_text(&topic.qid, &topic.query, index.analyzer());
        let direct = retrieve(&index, &q, c.depth, Bm25Params::default()).unwrap();
        assert_eq!(run.qid, topic.qid);
        assert_eq!(
            run.docnos().collect::<Vec<_>>(),
            direct.docnos().collect::<Vec<_>>()
        );
        for (a, b) in run.entries.iter().zip(&direct.entries) {
            assert!((a.score - b.score).abs() < 1e-4);
        }
    }
}

#[test]
fn reformulations_record_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "experiment.toml");
    let out = cmd_run(&c).unwrap();
    assert_eq!(out.backend_calls, 100);
    let text = std::fs::read_to_string(c.output.join(REFORMULATIONS_FILE)).unwrap();
    let items = read_reformulations(&text).unwrap();
    assert_eq!(items.len(), 10);
    for r in &items {
        assert_eq!(r.provenance.method, "genqrensemble");
        assert_eq!(r.provenance.instructions, (1..=10).collect::<Vec<_>>());
        assert_eq!(r.keywords.len(), 10);
        assert_eq!(r.provenance.cache_keys.len(), 10);
        assert!(r.provenance.context.is_none());
        // Original terms lead the fused query.
        let lead: Vec<&str> = r
            .fused
            .terms
            .iter()
            .take(2)
            .map(|(t, _)| t.as_str())
            .collect();
        assert_eq!(lead.join(" "), r.original);
    }
}

#[test]
fn pseudo_and_oracle_feedback_differ_only_in_context() {
    let tmp = tempfile::tempdir().unwrap();
    let base = config(tmp.path(), "experiment.toml");
    let mut runs = Vec::new();
    for mode in [FeedbackMode::Pseudo, FeedbackMode::Oracle] {
        let mut c = base.clone();
        c.method = Method::GenqrensembleRf;
        c.reformulation.feedback = mode;
        c.output = tmp.path().join(format!("{mode:?}"));
        runs.push(cmd_run(&c).unwrap().reformulations);
    }
    let (pseudo, oracle) = (&runs[0], &runs[1]);
    let mut differing = 0;
    for (p, o) in pseudo.iter().zip(oracle) {
        assert_eq!(p.qid, o.qid);
        assert_eq!(p.provenance.instructions, o.provenance.instructions);
        assert!((1..=5).contains(&p.provenance.feedback_docnos.len()));
        assert!(!o.provenance.feedback_docnos.is_empty());
        // Oracle context is drawn from judged-relevant documents only.
        assert!(
            o.provenance.feedback_docnos.iter().all(|d| d.contains('R')),
            "{:?}",
            o.provenance.feedback_docnos
        );
        if p.provenance.feedback_docnos != o.provenance.feedback_docnos {
            differing += 1;
            assert_ne!(p.provenance.context, o.provenance.context);
        }
    }
    assert!(differing > 0);
}

#[test]
fn eval_and_querywise_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let base = config(tmp.path(), "experiment.toml");
    let mut paths = Vec::new();
    for m in [Method::Raw, Method::Genqrensemble] {
        let mut c = base.clone();
        c.method = m;
        c.output = tmp.path().join(m.name());
        paths.push(cmd_run(&c).unwrap().run_path);
    }
    let qrels = base.data.qrels.clone().unwrap();
    let metrics = [MetricSpec::ndcg(10), MetricSpec::map()];
    let eval_dir = tmp.path().join("eval");
    let out = cmd_eval(&paths, &qrels, &metrics, 0.05, Some(&eval_dir)).unwrap();
    assert_eq!(out.table.baseline, "raw");
    assert_eq!(out.table.rows.len(), 4);
    for name in ["raw.eval.tsv", "genqrensemble.eval.tsv", "comparison.tsv"] {
        assert!(eval_dir.join(name).exists(), "{name}");
    }
    let tsv = std::fs::read_to_string(eval_dir.join("raw.eval.tsv")).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("ndcg@10\tall\t")));

    let csv = cmd_querywise(&paths[0], &paths[1], &qrels, MetricSpec::ndcg(10)).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "qid,value_a,value_b,delta");
    assert_eq!(rows.len(), 11);
    let deltas: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
    let qids: BTreeSet<&str> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(qids.len(), 10);
}

#[test]
fn sweep_reuses_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), "oracle.toml");
    c.metrics = vec![MetricSpec::ndcg(10)];
    let cold = cmd_sweep(&c).unwrap();
    assert_eq!(cold.rows.len(), 4);
    assert!(cold.backend_calls > 0);
    let csv = std::fs::read_to_string(c.output.join(SWEEP_FILE)).unwrap();
    assert!(csv.starts_with("param,value,metric,score\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(c.output.join("m=2").join(RUN_FILE).exists());

    let warm = cmd_sweep(&c).unwrap();
    assert_eq!(warm.backend_calls, 0);
    assert_eq!(warm.rows, cold.rows);
}

#[test]
fn lenient_runs_record_failures() {
    let tmp = tempfile::tempdir().unwrap();
    // A transcript missing every prompt for one topic.
    let recorded = std::fs::read_to_string(toy().join("transcript.jsonl")).unwrap();
    let kept: Vec<TranscriptRecord> = recorded
        .lines()
        .map(|l| serde_json::from_str::<TranscriptRecord>(l).unwrap())
        .filter(|r| !r.prompt.ends_with(": volcano eruption"))
        .collect();
    let transcript = tmp.path().join("partial.jsonl");
    write_transcript(&kept, &transcript).unwrap();

    let mut c = config(tmp.path(), "replay.toml");
    c.cache = None;
    c.backend = Some(BackendConfig::Replay { transcript });
    assert!(cmd_run(&c).is_err());

    c.lenient = true;
    let out = cmd_run(&c).unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].qid, "3");
    assert_eq!(out.runs.len(), 9);
    let failures = std::fs::read_to_string(c.output.join(FAILURES_FILE)).unwrap();
    assert!(failures.contains('3'));
    assert!(read_run(c.output.join(RUN_FILE))
        .unwrap()
        .iter()
        .all(|r| r.qid != "3"));
}

#[test]
fn replay_reproduces_the_stub_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut stub = config(tmp.path(), "experiment.toml");
    stub.tag = Some("same".into());
    let mut replay = config(tmp.path(), "replay.toml");
    replay.tag = Some("same".into());
    replay.output = tmp.path().join("replay");
    let a = cmd_run(&stub).unwrap();
    let b = cmd_run(&replay).unwrap();
    assert_eq!(
        std::fs::read(a.run_path).unwrap(),
        std::fs::read(b.run_path).unwrap()
    );
}

#[test]
fn paraphrase_with_stub_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "experiment.toml");
    let a = cmd_paraphrase(&c, None, 4, &tmp.path().join("a.txt")).unwrap();
    let b = cmd_paraphrase(&c, None, 4, &tmp.path().join("b.txt")).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
    assert_eq!(a.base(), b.base());
    let saved = std::fs::read_to_string(tmp.path().join("a.txt")).unwrap();
    assert_eq!(saved.lines().count(), 4);
}
