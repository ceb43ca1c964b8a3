//! Index a handful of documents, persist the index, reload it and rank.
//!
//! ```text
//! cargo run --example bm25_retrieval
//! ```

use genqr::corpus_io::write_run_to;
use genqr::index::{load_index, save_index};
use genqr::{build_index, retrieve, Analyzer, Bm25Params, Document, WeightedQuery};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let docs = [
        (
            "d1",
            "Goldfish can grow to surprising sizes in large ponds.",
        ),
        ("d2", "Goldfish crackers are a popular snack."),
        (
            "d3",
            "How fast do koi and goldfish grow? Growth depends on tank size.",
        ),
        ("d4", "Austin breweries offer tours on weekends."),
    ];
    let analyzer = Analyzer::default().with_stopwords(["a", "are", "can", "do", "in", "on", "to"]);
    let index = build_index(
        docs.iter().map(|(id, text)| Ok(Document::new(*id, *text))),
        analyzer,
    )?;

    let dir = tempfile::tempdir()?;
    save_index(&index, dir.path())?;
    let index = load_index(dir.path())?;
    println!(
        "{} docs, {} terms, avgdl {:.2}",
        index.num_docs(),
        index.num_terms(),
        index.avg_doc_len()
    );

    let query = WeightedQuery::from_text("1", "do goldfish grow", index.analyzer());
    let run = retrieve(&index, &query, 10, Bm25Params::default())?;
    write_run_to(&[run], std::io::stdout())?;

    // Weighted queries need not come from text: favour "size" over "goldfish".
    let weighted = WeightedQuery::new("2", vec![("goldfish".into(), 0.5), ("size".into(), 2.0)]);
    let run = retrieve(&index, &weighted, 3, Bm25Params { k1: 0.9, b: 0.4 })?;
    write_run_to(&[run], std::io::stdout())?;
    Ok(())
}
