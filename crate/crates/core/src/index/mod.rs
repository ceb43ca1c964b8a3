//! Inverted index and BM25 retrieval.

mod analyzer;
mod bm25;
mod store;

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::corpus_io::{CorpusError, Document};

pub use analyzer::{Analyzer, Stemmer};
pub use bm25::{bm25_score, retrieve, Bm25Params, WeightedQuery};
pub use store::{load_index, load_index_checked, save_index, INDEX_FILE, INDEX_VERSION};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("duplicate docno `{0}`")]
    DuplicateDocno(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("degenerate query `{0}`: no term has positive weight")]
    DegenerateQuery(String),
    #[error("query `{qid}` has invalid weight {weight} for term `{term}`")]
    InvalidWeight {
        qid: String,
        term: String,
        weight: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt index ({message})")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: index format version {found} is not supported (expected {expected}); rebuild the index")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: index was built with analyzer {found}, but {expected} is configured; rebuild the index")]
    FingerprintMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

pub type Result<T, E = IndexError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable inverted index with the collection statistics BM25 and RM3
/// need. Terms are stored sorted; postings are sorted by doc ordinal.
#[derive(Debug, Clone, PartialEq)]
pub struct PostingsIndex {
    analyzer: Analyzer,
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    collection_freq: Vec<u64>,
    docnos: Vec<String>,
    doc_lens: Vec<u32>,
    total_tokens: u64,
}

impl PostingsIndex {
    pub(crate) fn from_parts(
        analyzer: Analyzer,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
        docnos: Vec<String>,
        doc_lens: Vec<u32>,
    ) -> Self {
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let collection_freq = postings
            .iter()
            .map(|p| p.iter().map(|x| u64::from(x.tf)).sum())
            .collect();
        let total_tokens = doc_lens.iter().map(|&l| u64::from(l)).sum();
        Self {
            analyzer,
            terms,
            term_ids,
            postings,
            collection_freq,
            docnos,
            doc_lens,
            total_tokens,
        }
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docnos.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.docnos.len() as f64
        }
    }

    pub fn docno(&self, ord: u32) -> &str {
        &self.docnos[ord as usize]
    }

    pub fn doc_len(&self, ord: u32) -> u32 {
        self.doc_lens[ord as usize]
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_ids
            .get(term)
            .map(|&id| self.postings[id as usize].as_slice())
            .unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Total occurrences of `term` across the collection.
    pub fn collection_freq(&self, term: &str) -> u64 {
        self.term_ids
            .get(term)
            .map(|&id| self.collection_freq[id as usize])
            .unwrap_or(0)
    }

    pub(crate) fn raw_postings(&self) -> &[Vec<Posting>] {
        &self.postings
    }

    pub(crate) fn raw_terms(&self) -> &[String] {
        &self.terms
    }

    pub(crate) fn raw_docnos(&self) -> &[String] {
        &self.docnos
    }

    pub(crate) fn raw_doc_lens(&self) -> &[u32] {
        &self.doc_lens
    }
}

/// Single-writer index construction.
#[derive(Debug)]
pub struct IndexBuilder {
    analyzer: Analyzer,
    postings: HashMap<String, Vec<Posting>>,
    docnos: Vec<String>,
    doc_lens: Vec<u32>,
    seen: HashMap<String, u32>,
}

impl IndexBuilder {
    pub fn new(analyzer: Analyzer) -> Self {
        Self {
            analyzer,
            postings: HashMap::new(),
            docnos: Vec::new(),
            doc_lens: Vec::new(),
            seen: HashMap::new(),
        }
    }

    pub fn add(&mut self, doc: &Document) -> Result<()> {
        let ord = self.docnos.len() as u32;
        if self.seen.insert(doc.docno.clone(), ord).is_some() {
            return Err(IndexError::DuplicateDocno(doc.docno.clone()));
        }
        let tokens = self.analyzer.analyze(&doc.full_text());
        let mut counts: HashMap<String, u32> = HashMap::new();
        for t in &tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            self.postings
                .entry(term)
                .or_default()
                .push(Posting { doc: ord, tf });
        }
        self.docnos.push(doc.docno.clone());
        self.doc_lens.push(tokens.len() as u32);
        Ok(())
    }

    pub fn finish(self) -> PostingsIndex {
        let mut entries: Vec<(String, Vec<Posting>)> = self.postings.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (terms, postings): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        PostingsIndex::from_parts(self.analyzer, terms, postings, self.docnos, self.doc_lens)
    }
}

pub fn build_index<I>(corpus: I, analyzer: Analyzer) -> Result<PostingsIndex>
where
    I: IntoIterator<Item = std::result::Result<Document, CorpusError>>,
{
    let mut builder = IndexBuilder::new(analyzer);
    for doc in corpus {
        builder.add(&doc?)?;
    }
    Ok(builder.finish())
}
