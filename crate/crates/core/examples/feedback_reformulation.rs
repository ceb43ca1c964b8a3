//! Reformulation conditioned on feedback documents: first-pass BM25 (pseudo)
//! or judged-relevant documents (oracle) are prepended to every instruction.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use genqr::corpus_io::{load_corpus, load_qrels, CorpusFormat};
use genqr::prf::{select_feedback, select_oracle_feedback};
use genqr::{
    build_index, genqr_ensemble_rf, retrieve, Analyzer, Bm25Params, DocStore, Generator,
    InstructionSet, ReformulationConfig, StubBackend, Topic, WeightedQuery,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let corpus = toy.join("corpus.jsonl");
    let index = build_index(
        load_corpus(&corpus, CorpusFormat::Jsonl)?,
        Analyzer::default(),
    )?;
    let store = DocStore::load(&corpus, CorpusFormat::Jsonl)?;
    let qrels = load_qrels(toy.join("qrels.txt"))?;
    let thesaurus: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(toy.join("thesaurus.json"))?)?;
    let generator = Generator::new(Arc::new(StubBackend::new(thesaurus, vec![], 3, 7)?));

    let topic = Topic::new("1", "goldfish grow");
    let config = ReformulationConfig {
        m: 3,
        seed: Some(7),
        ..Default::default()
    };
    let first = retrieve(
        &index,
        &WeightedQuery::from_text(&topic.qid, &topic.query, index.analyzer()),
        100,
        Bm25Params::default(),
    )?;

    let pseudo = select_feedback(&first, &store, config.m)?;
    let oracle = select_oracle_feedback(&qrels, &store, &topic.qid, config.m)?;
    for feedback in [pseudo, oracle] {
        let r = genqr_ensemble_rf(
            &generator,
            &InstructionSet::bundled(),
            &topic,
            &feedback,
            &config,
            index.analyzer(),
        )?;
        println!(
            "== {:?} feedback from {:?}",
            feedback.source, r.provenance.feedback_docnos
        );
        println!("first prompt: {}", r.provenance.prompts[0]);
        let run = retrieve(&index, &r.fused, 5, Bm25Params::default())?;
        println!("top 5: {:?}\n", run.docnos().collect::<Vec<_>>());
    }
    Ok(())
}
