use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Analyzer, IndexError, PostingsIndex, Result};
use crate::corpus_io::{sort_scored, RunList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// A bag of analyzed terms with non-negative weights. Repeated terms are
/// allowed; the scorer sums their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedQuery {
    pub qid: String,
    pub terms: Vec<(String, f64)>,
}

impl WeightedQuery {
    pub fn new(qid: impl Into<String>, terms: Vec<(String, f64)>) -> Self {
        Self {
            qid: qid.into(),
            terms,
        }
    }

    /// One unit-weight entry per analyzed token of `text`.
    pub fn from_text(qid: impl Into<String>, text: &str, analyzer: &Analyzer) -> Self {
        Self::new(
            qid,
            analyzer
                .analyze(text)
                .into_iter()
                .map(|t| (t, 1.0))
                .collect(),
        )
    }

    /// Summed weight per term, ordered by term.
    pub fn aggregated(&self) -> BTreeMap<&str, f64> {
        let mut out: BTreeMap<&str, f64> = BTreeMap::new();
        for (t, w) in &self.terms {
            *out.entry(t.as_str()).or_default() += *w;
        }
        out
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.terms
            .iter()
            .filter(|(t, _)| t == term)
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.terms.iter().any(|(_, w)| *w > 0.0)
    }

    pub(crate) fn check(&self) -> Result<BTreeMap<&str, f64>> {
        for (t, w) in &self.terms {
            if !w.is_finite() || *w < 0.0 {
                return Err(IndexError::InvalidWeight {
                    qid: self.qid.clone(),
                    term: t.clone(),
                    weight: *w,
                });
            }
        }
        let agg = self.aggregated();
        if !agg.values().any(|w| *w > 0.0) {
            return Err(IndexError::DegenerateQuery(self.qid.clone()));
        }
        Ok(agg)
    }
}

fn idf(n_docs: f64, df: f64) -> f64 {
    ((n_docs - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 scores of every document that contains at least one positively
/// weighted query term, as `(doc ordinal, score)` sorted by ordinal.
pub fn bm25_score(
    index: &PostingsIndex,
    query: &WeightedQuery,
    params: Bm25Params,
) -> Result<Vec<(u32, f64)>> {
    if index.num_docs() == 0 {
        return Err(IndexError::EmptyIndex);
    }
    if !(params.k1 >= 0.0 && params.k1.is_finite()) || !(0.0..=1.0).contains(&params.b) {
        return Err(IndexError::InvalidParam(format!(
            "k1={} b={} (need k1 >= 0, 0 <= b <= 1)",
            params.k1, params.b
        )));
    }
    let weights = query.check()?;
    let n = index.num_docs() as f64;
    let avgdl = index.avg_doc_len();
    let mut acc = vec![0.0f64; index.num_docs()];
    let mut touched = vec![false; index.num_docs()];
    for (term, w) in weights {
        if w <= 0.0 {
            continue;
        }
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        let idf = idf(n, postings.len() as f64);
        for p in postings {
            let tf = f64::from(p.tf);
            let len = f64::from(index.doc_len(p.doc));
            let norm = if avgdl > 0.0 {
                params.k1 * (1.0 - params.b + params.b * len / avgdl)
            } else {
                params.k1
            };
            acc[p.doc as usize] += w * idf * tf * (params.k1 + 1.0) / (tf + norm);
            touched[p.doc as usize] = true;
        }
    }
    Ok(touched
        .iter()
        .enumerate()
        .filter(|(_, t)| **t)
        .map(|(d, _)| (d as u32, acc[d]))
        .collect())
}

/// Top-`k` documents by BM25, score descending with docno ascending on ties.
/// The returned run has an empty tag.
pub fn retrieve(
    index: &PostingsIndex,
    query: &WeightedQuery,
    k: usize,
    params: Bm25Params,
) -> Result<RunList> {
    if k == 0 {
        return Err(IndexError::InvalidParam(
            "retrieval depth must be positive".into(),
        ));
    }
    let mut scored: Vec<(String, f64)> = bm25_score(index, query, params)?
        .into_iter()
        .map(|(d, s)| (index.docno(d).to_string(), s))
        .collect();
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, |a, b| {
            b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(k);
    }
    sort_scored(&mut scored);
    Ok(RunList::from_scored(
        query.qid.clone(),
        String::new(),
        scored,
    ))
}
