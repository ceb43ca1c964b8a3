//! Single-instruction vs. ten-instruction reformulation with the offline
//! stub generator, retrieved against the toy corpus.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use genqr::corpus_io::{load_corpus, CorpusFormat};
use genqr::{
    build_index, flan_qr, genqr_ensemble, retrieve, Analyzer, Bm25Params, Generator,
    InstructionSet, ReformulationConfig, StubBackend, Topic,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let index = build_index(
        load_corpus(toy.join("corpus.jsonl"), CorpusFormat::Jsonl)?,
        Analyzer::default(),
    )?;
    let thesaurus: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(toy.join("thesaurus.json"))?)?;
    let generator = Generator::new(Arc::new(StubBackend::new(thesaurus, vec![], 3, 7)?));

    let instructions = InstructionSet::bundled();
    let topic = Topic::new("1", "goldfish grow");
    let config = ReformulationConfig {
        seed: Some(7),
        ..Default::default()
    };

    let single = flan_qr(
        &generator,
        instructions.base(),
        &topic,
        &config,
        index.analyzer(),
    )?;
    let ensemble = genqr_ensemble(&generator, &instructions, &topic, &config, index.analyzer())?;

    for (i, (prompt, kw)) in ensemble
        .provenance
        .prompts
        .iter()
        .zip(&ensemble.keywords)
        .enumerate()
    {
        println!("[{}] {prompt}\n     -> {kw}", i + 1);
    }
    for (name, r) in [("single", &single), ("ensemble", &ensemble)] {
        let terms: Vec<String> = r
            .fused
            .terms
            .iter()
            .map(|(t, w)| format!("{t}:{w}"))
            .collect();
        let run = retrieve(&index, &r.fused, 5, Bm25Params::default())?;
        println!(
            "{name:>8}: {}\n          top 5 {:?}",
            terms.join(" "),
            run.docnos().collect::<Vec<_>>()
        );
    }
    Ok(())
}
