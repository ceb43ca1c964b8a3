//! Score two runs over the toy topics and compare them with paired t-tests
//! and Holm correction.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use genqr::corpus_io::{load_corpus, load_qrels, load_topics, CorpusFormat, TopicFormat};
use genqr::eval::{compare, RunReports};
use genqr::{
    build_index, evaluate, genqr_ensemble, retrieve, Analyzer, Bm25Params, Generator,
    InstructionSet, MetricSpec, ReformulationConfig, StubBackend, WeightedQuery,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let index = build_index(
        load_corpus(toy.join("corpus.jsonl"), CorpusFormat::Jsonl)?,
        Analyzer::default(),
    )?;
    let topics = load_topics(toy.join("topics.tsv"), TopicFormat::Tsv)?;
    let qrels = load_qrels(toy.join("qrels.txt"))?;
    let thesaurus: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(toy.join("thesaurus.json"))?)?;
    let generator = Generator::new(Arc::new(StubBackend::new(thesaurus, vec![], 3, 7)?));
    let config = ReformulationConfig {
        seed: Some(7),
        ..Default::default()
    };

    let mut raw = Vec::new();
    let mut ensemble = Vec::new();
    for topic in &topics {
        let q = WeightedQuery::from_text(&topic.qid, &topic.query, index.analyzer());
        raw.push(retrieve(&index, &q, 100, Bm25Params::default())?);
        let r = genqr_ensemble(
            &generator,
            &InstructionSet::bundled(),
            topic,
            &config,
            index.analyzer(),
        )?;
        ensemble.push(retrieve(&index, &r.fused, 100, Bm25Params::default())?);
    }

    let metrics = [
        MetricSpec::ndcg(10),
        MetricSpec::map(),
        MetricSpec::mrr(),
        MetricSpec::precision(10),
    ];
    let report = |runs: &[_]| -> Result<Vec<_>, genqr::eval::EvalError> {
        metrics.iter().map(|m| evaluate(runs, &qrels, *m)).collect()
    };
    let baseline = RunReports::new("bm25", report(&raw)?);
    let others = [RunReports::new("ensemble", report(&ensemble)?)];
    print!("{}", compare(&baseline, &others, 0.05)?.render());

    let ndcg = &others[0].reports[0];
    println!("\nper-query {}:", ndcg.metric);
    for (qid, v) in &ndcg.per_query {
        println!(
            "  {qid:>3} {v:.4}  (bm25 {:.4})",
            baseline.reports[0].per_query[qid]
        );
    }
    Ok(())
}
