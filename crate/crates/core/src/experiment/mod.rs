//! Config-driven experiment pipelines: indexing, method runs, evaluation,
//! per-query comparisons, parameter sweeps and instruction paraphrasing.

mod commands;
mod config;
pub mod rerank;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus_io::CorpusError;
use crate::eval::EvalError;
use crate::index::IndexError;
use crate::llm::LlmError;
use crate::prf::PrfError;
use crate::reformulate::ReformulateError;

pub use commands::{
    cmd_eval, cmd_index, cmd_paraphrase, cmd_querywise, cmd_run, cmd_sweep, EvalOutcome,
    IndexOutcome, QueryFailure, RunOutcome, SweepOutcome, SweepRow, FAILURES_FILE,
    REFORMULATIONS_FILE, RUN_FILE, SWEEP_FILE, TRANSCRIPT_FILE,
};
pub use config::{apply_param, DataConfig, ExperimentConfig, Method, RerankerConfig, SweepSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Prf(#[from] PrfError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Reformulate(#[from] ReformulateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("query `{qid}`: {source}")]
    Query {
        qid: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("reranker: {0}")]
    Rerank(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;
