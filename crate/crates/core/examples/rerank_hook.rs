//! Re-rank the head of a run with an external command. The command gets a
//! `qid<TAB>docno<TAB>query<TAB>text` file and writes `qid docno score`
//! lines; here a shell one-liner scores documents by how often the first
//! query word occurs, applied to the top 10 of an ensemble run.

use std::path::Path;

use genqr::experiment::{cmd_index, cmd_run, ExperimentConfig, Method, RerankerConfig};

const SCRIPT: &str =
    r#"awk -F'\t' '{ split($3, q, " "); n = gsub(q[1], "", $4); print $1, $2, n }' "$0" > "$1""#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let mut config = ExperimentConfig::load(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/experiment.toml"),
    )?;
    config.method = Method::Genqrensemble;
    config.cache = Some(tmp.path().join("cache"));
    config.data.index = tmp.path().join("index");
    config.output = tmp.path().join("plain");
    cmd_index(&config, false)?;
    let plain = cmd_run(&config)?;

    config.output = tmp.path().join("reranked");
    config.tag = Some("genqrensemble_reranked".into());
    config.reranker = Some(RerankerConfig {
        command: vec!["sh".into(), "-c".into(), SCRIPT.into()],
        depth: 10,
    });
    let reranked = cmd_run(&config)?;

    for (a, b) in plain.runs.iter().zip(&reranked.runs).take(3) {
        println!("qid {}", a.qid);
        println!("  ensemble {:?}", a.docnos().take(5).collect::<Vec<_>>());
        println!("  reranked {:?}", b.docnos().take(5).collect::<Vec<_>>());
    }
    Ok(())
}
