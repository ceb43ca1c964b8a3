//! Pseudo-relevance feedback with RM3 on the toy corpus.

use std::path::Path;

use genqr::corpus_io::{load_corpus, CorpusFormat};
use genqr::prf::select_feedback;
use genqr::{
    build_index, retrieve, rm3_expand, Analyzer, Bm25Params, DocStore, Rm3Params, WeightedQuery,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/corpus.jsonl");
    let index = build_index(
        load_corpus(&corpus, CorpusFormat::Jsonl)?,
        Analyzer::default(),
    )?;
    let store = DocStore::load(&corpus, CorpusFormat::Jsonl)?;

    let query = WeightedQuery::from_text("1", "goldfish grow", index.analyzer());
    let first = retrieve(&index, &query, 100, Bm25Params::default())?;
    let params = Rm3Params {
        fb_docs: 5,
        fb_terms: 10,
        lambda: 0.5,
        ..Default::default()
    };
    let feedback = select_feedback(&first, &store, params.fb_docs)?;
    let expanded = rm3_expand(&index, &query, &feedback, params)?;

    println!(
        "feedback docs: {:?}",
        feedback.docs.iter().map(|d| &d.docno).collect::<Vec<_>>()
    );
    for (term, weight) in &expanded.terms {
        println!("{term:>14} {weight:.4}");
    }
    let second = retrieve(&index, &expanded, 5, Bm25Params::default())?;
    println!("before: {:?}", first.docnos().take(5).collect::<Vec<_>>());
    println!("after:  {:?}", second.docnos().collect::<Vec<_>>());
    Ok(())
}
