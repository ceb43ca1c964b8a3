//! Query reformulation by prompting a text generator with an ensemble of
//! paraphrased instructions, plus the retrieval and evaluation machinery
//! needed to measure it.
//!
//! The pieces, bottom up:
//!
//! * [`corpus_io`]: documents, topics, qrels and TREC run files.
//! * [`index`]: analyzer, inverted index, BM25 retrieval, on-disk format.
//! * [`prf`]: feedback-document selection and RM3 expansion.
//! * [`llm`]: generation backends (HTTP, deterministic stub, replay) behind a
//!   response cache.
//! * [`reformulate`]: instruction sets, keyword generation and fusion — the
//!   ensemble reformulator with and without feedback context.
//! * [`eval`]: nDCG, MAP, MRR, P@k, paired t-test and Holm correction.
//! * [`experiment`]: config-driven commands that tie it all together.
//!
//! ```
//! use std::sync::Arc;
//! use genqr::{build_index, genqr_ensemble, retrieve, Analyzer, Bm25Params, Document,
//!             Generator, InstructionSet, ReformulationConfig, StubBackend, Topic};
//!
//! let docs = ["koi carp pond", "goldfish crackers snack", "goldfish bowl"]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, t)| Ok(Document::new(format!("d{i}"), *t)));
//! let index = build_index(docs, Analyzer::default()).unwrap();
//!
//! let thesaurus = [("goldfish".to_string(), vec!["koi".to_string(), "carp".to_string()])].into();
//! let generator = Generator::new(Arc::new(StubBackend::new(thesaurus, vec![], 2, 0).unwrap()));
//!
//! let topic = Topic::new("1", "goldfish");
//! let config = ReformulationConfig { n: Some(3), ..Default::default() };
//! let r = genqr_ensemble(&generator, &InstructionSet::bundled(), &topic, &config, index.analyzer())
//!     .unwrap();
//! let run = retrieve(&index, &r.fused, 10, Bm25Params::default()).unwrap();
//! assert_eq!(run.entries[0].docno, "d0");
//! ```

pub mod corpus_io;
pub mod eval;
pub mod experiment;
pub mod index;
pub mod llm;
pub mod prf;
pub mod reformulate;

pub use corpus_io::{DocStore, Document, Qrels, RunList, Topic};
pub use eval::{evaluate, EvalReport, MetricSpec};
pub use index::{build_index, retrieve, Analyzer, Bm25Params, PostingsIndex, WeightedQuery};
pub use llm::{Backend, BackendConfig, Generator, ReplayBackend, ResponseCache, StubBackend};
pub use prf::{rm3_expand, FeedbackSet, Rm3Params};
pub use reformulate::{
    flan_qr, fuse, genqr_ensemble, genqr_ensemble_rf, InstructionSet, Reformulation,
    ReformulationConfig,
};
