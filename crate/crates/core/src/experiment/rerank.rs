//! External re-ranking through a scored-file exchange.
//!
//! The top `depth` documents of every run are written to a TSV file with
//! columns `qid docno query text` (tabs and newlines in text replaced by
//! spaces). The configured command is invoked with the input path and an
//! output path appended to its arguments, and must write whitespace-separated
//! `qid docno score` lines covering every input pair. The top `depth`
//! entries are then re-sorted by the new scores (docno ascending on ties);
//! deeper entries keep their order below them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use super::config::RerankerConfig;
use super::ExperimentError;
use crate::corpus_io::{DocStore, RunList};

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn rerank(
    runs: &mut [RunList],
    queries: &HashMap<String, String>,
    store: &DocStore,
    config: &RerankerConfig,
    workdir: &Path,
) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(workdir).map_err(|e| ExperimentError::io(workdir, e))?;
    let input = workdir.join("rerank_input.tsv");
    let output = workdir.join("rerank_output.tsv");
    let mut body = String::new();
    for run in runs.iter() {
        let query = queries
            .get(&run.qid)
            .map(String::as_str)
            .unwrap_or_default();
        for e in run.entries.iter().take(config.depth) {
            let text = store
                .get(&e.docno)
                .map(|d| d.full_text())
                .unwrap_or_default();
            let _ = writeln!(
                body,
                "{}\t{}\t{}\t{}",
                run.qid,
                e.docno,
                clean(query),
                clean(&text)
            );
        }
    }
    std::fs::write(&input, body).map_err(|e| ExperimentError::io(&input, e))?;
    let _ = std::fs::remove_file(&output);

    let status = Command::new(&config.command[0])
        .args(&config.command[1..])
        .arg(&input)
        .arg(&output)
        .status()
        .map_err(|e| {
            ExperimentError::Rerank(format!("cannot start `{}`: {e}", config.command[0]))
        })?;
    if !status.success() {
        return Err(ExperimentError::Rerank(format!(
            "reranker exited with {status}"
        )));
    }

    let text = std::fs::read_to_string(&output).map_err(|e| ExperimentError::io(&output, e))?;
    let mut scores: HashMap<(String, String), f64> = HashMap::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let score = match cols.as_slice() {
            [_, _, s] => s.parse::<f64>().ok().filter(|v| v.is_finite()),
            _ => None,
        }
        .ok_or_else(|| {
            ExperimentError::Rerank(format!("output line {}: expected `qid docno score`", i + 1))
        })?;
        scores.insert((cols[0].to_string(), cols[1].to_string()), score);
    }

    for run in runs.iter_mut() {
        let cut = config.depth.min(run.entries.len());
        let mut head = Vec::with_capacity(cut);
        for e in &run.entries[..cut] {
            let s = scores
                .get(&(run.qid.clone(), e.docno.clone()))
                .ok_or_else(|| {
                    ExperimentError::Rerank(format!("no score for {} {}", run.qid, e.docno))
                })?;
            head.push((e.docno.clone(), *s));
        }
        crate::corpus_io::sort_scored(&mut head);
        // Deeper entries are placed strictly below the re-ranked head.
        let floor = head.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        let floor = if floor.is_finite() { floor } else { 0.0 };
        let tail = run.entries[cut..]
            .iter()
            .enumerate()
            .map(|(i, e)| (e.docno.clone(), floor - (i + 1) as f64));
        let all: Vec<(String, f64)> = head.into_iter().chain(tail).collect();
        *run = RunList::from_scored(run.qid.clone(), run.tag.clone(), all);
    }
    Ok(())
}
