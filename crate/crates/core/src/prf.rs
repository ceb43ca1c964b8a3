//! Feedback-document selection and RM3 query expansion.
//!
//! The relevance model is the RM1 estimate over the feedback documents,
//!
//! ```text
//! P(t|R) ∝ Σ_d P(t|d) · P(q|d)
//! ```
//!
//! with Dirichlet-smoothed document models `P(t|d) = (tf + μ·P(t|C)) / (|d| + μ)`
//! and the query likelihood `P(q|d) = Π_q P(q|d)^w(q)`. RM3 truncates it to
//! the top `fb_terms` terms, renormalizes, and interpolates with the
//! normalized original query.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{DocStore, Qrels, RunList};
use crate::index::{IndexError, PostingsIndex, WeightedQuery};

#[derive(Debug, Error)]
pub enum PrfError {
    #[error("feedback document `{0}` is not in the corpus")]
    MissingDocument(String),
    #[error("no oracle feedback available for qid `{0}`")]
    NoOracleFeedback(String),
    #[error("feedback set is empty")]
    EmptyFeedback,
    #[error("interpolation weight {0} is outside [0, 1]")]
    InvalidLambda(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

pub type Result<T, E = PrfError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackSource {
    Pseudo,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDoc {
    pub docno: String,
    pub text: String,
    /// Retrieval score for pseudo feedback, relevance grade for oracle feedback.
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSet {
    pub qid: String,
    pub source: FeedbackSource,
    pub docs: Vec<FeedbackDoc>,
}

impl FeedbackSet {
    pub fn empty(qid: impl Into<String>, source: FeedbackSource) -> Self {
        Self {
            qid: qid.into(),
            source,
            docs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.text.as_str())
    }
}

/// Top-`m` documents of a first-pass run. An empty run yields an empty set.
pub fn select_feedback(run: &RunList, store: &DocStore, m: usize) -> Result<FeedbackSet> {
    let docs = run
        .entries
        .iter()
        .take(m)
        .map(|e| {
            let doc = store
                .get(&e.docno)
                .ok_or_else(|| PrfError::MissingDocument(e.docno.clone()))?;
            Ok(FeedbackDoc {
                docno: e.docno.clone(),
                text: doc.full_text(),
                evidence: e.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeedbackSet {
        qid: run.qid.clone(),
        source: FeedbackSource::Pseudo,
        docs,
    })
}

/// The `m` highest-graded judged-relevant documents, grade descending and
/// docno ascending on ties.
pub fn select_oracle_feedback(
    qrels: &Qrels,
    store: &DocStore,
    qid: &str,
    m: usize,
) -> Result<FeedbackSet> {
    let mut relevant: Vec<(&str, u32)> = qrels
        .judgments(qid)
        .into_iter()
        .flatten()
        .filter(|(_, g)| **g > 0)
        .map(|(d, g)| (d.as_str(), *g))
        .collect();
    if relevant.is_empty() {
        return Err(PrfError::NoOracleFeedback(qid.to_string()));
    }
    relevant.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let docs = relevant
        .into_iter()
        .take(m)
        .map(|(docno, grade)| {
            let doc = store
                .get(docno)
                .ok_or_else(|| PrfError::MissingDocument(docno.to_string()))?;
            Ok(FeedbackDoc {
                docno: docno.to_string(),
                text: doc.full_text(),
                evidence: f64::from(grade),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeedbackSet {
        qid: qid.to_string(),
        source: FeedbackSource::Oracle,
        docs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 5,
            fb_terms: 10,
            lambda: 0.5,
            mu: 2500.0,
        }
    }
}

/// Truncated, renormalized relevance model, highest probability first.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceModel {
    pub probs: Vec<(String, f64)>,
}

impl RelevanceModel {
    pub fn total(&self) -> f64 {
        self.probs.iter().map(|(_, p)| p).sum()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.probs
            .iter()
            .find(|(t, _)| t == term)
            .map_or(0.0, |(_, p)| *p)
    }
}

pub fn relevance_model(
    index: &PostingsIndex,
    original: &WeightedQuery,
    feedback: &FeedbackSet,
    fb_terms: usize,
    mu: f64,
) -> Result<RelevanceModel> {
    if feedback.is_empty() {
        return Err(PrfError::EmptyFeedback);
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(PrfError::InvalidParam(format!(
            "dirichlet mu must be positive, got {mu}"
        )));
    }
    if index.total_tokens() == 0 {
        return Err(IndexError::EmptyIndex.into());
    }
    if original.is_degenerate() {
        return Err(IndexError::DegenerateQuery(original.qid.clone()).into());
    }
    let total = index.total_tokens() as f64;
    let p_coll = |t: &str| index.collection_freq(t) as f64 / total;

    let analyzer = index.analyzer();
    let doc_models: Vec<(HashMap<String, u32>, f64)> = feedback
        .docs
        .iter()
        .map(|d| {
            let toks = analyzer.analyze(&d.text);
            let len = toks.len() as f64;
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            (tf, len)
        })
        .collect();
    let p_doc = |tf: &HashMap<String, u32>, len: f64, t: &str| {
        (f64::from(tf.get(t).copied().unwrap_or(0)) + mu * p_coll(t)) / (len + mu)
    };

    // Query terms unseen in the collection contribute the same factor to
    // every document model and are left out of the likelihood.
    let query_terms: Vec<(&str, f64)> = original
        .aggregated()
        .into_iter()
        .filter(|(t, w)| *w > 0.0 && index.collection_freq(t) > 0)
        .collect();
    let log_ql: Vec<f64> = doc_models
        .iter()
        .map(|(tf, len)| {
            query_terms
                .iter()
                .map(|(t, w)| w * p_doc(tf, *len, t).ln())
                .sum()
        })
        .collect();
    let max = log_ql.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let doc_weights: Vec<f64> = log_ql.iter().map(|l| (l - max).exp()).collect();

    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for (tf, _) in &doc_models {
        for t in tf.keys() {
            scores.entry(t.as_str()).or_insert(0.0);
        }
    }
    for (term, score) in scores.iter_mut() {
        *score = doc_models
            .iter()
            .zip(&doc_weights)
            .map(|((tf, len), w)| p_doc(tf, *len, term) * w)
            .sum();
    }
    let mut probs: Vec<(String, f64)> = scores
        .into_iter()
        .map(|(t, s)| (t.to_string(), s))
        .collect();
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    probs.truncate(fb_terms);
    let z: f64 = probs.iter().map(|(_, p)| p).sum();
    if z > 0.0 {
        for (_, p) in probs.iter_mut() {
            *p /= z;
        }
    }
    Ok(RelevanceModel { probs })
}

/// RM3 expansion. Output lists the original terms first (first-appearance
/// order) followed by expansion terms in relevance-model order. With
/// `fb_terms == 0` the normalized original query is returned unchanged.
pub fn rm3_expand(
    index: &PostingsIndex,
    original: &WeightedQuery,
    feedback: &FeedbackSet,
    params: Rm3Params,
) -> Result<WeightedQuery> {
    if !(0.0..=1.0).contains(&params.lambda) {
        return Err(PrfError::InvalidLambda(params.lambda));
    }
    if feedback.is_empty() {
        return Err(PrfError::EmptyFeedback);
    }
    if original.is_degenerate() {
        return Err(IndexError::DegenerateQuery(original.qid.clone()).into());
    }
    let mut order: Vec<&str> = Vec::new();
    let mut orig: HashMap<&str, f64> = HashMap::new();
    for (t, w) in &original.terms {
        if !orig.contains_key(t.as_str()) {
            order.push(t);
        }
        *orig.entry(t).or_default() += *w;
    }
    let z: f64 = orig.values().sum();

    if params.fb_terms == 0 {
        return Ok(WeightedQuery::new(
            original.qid.clone(),
            order.iter().map(|t| (t.to_string(), orig[t] / z)).collect(),
        ));
    }

    let rm = relevance_model(index, original, feedback, params.fb_terms, params.mu)?;
    let lambda = params.lambda;
    let mut terms: Vec<(String, f64)> = order
        .iter()
        .map(|t| {
            (
                t.to_string(),
                lambda * orig[t] / z + (1.0 - lambda) * rm.get(t),
            )
        })
        .collect();
    for (t, p) in &rm.probs {
        let w = (1.0 - lambda) * p;
        if w > 0.0 && !orig.contains_key(t.as_str()) {
            terms.push((t.clone(), w));
        }
    }
    Ok(WeightedQuery::new(original.qid.clone(), terms))
}
