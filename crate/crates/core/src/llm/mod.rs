//! Text-generation backends used for instruction paraphrasing and keyword
//! generation.
//!
//! Three backends implement [`Backend`]:
//!
//! * [`HttpBackend`] posts a JSON completion request to a configurable URL.
//! * [`StubBackend`] deterministically samples terms from a fixture
//!   thesaurus/vocabulary, keyed by a hash of the prompt and seed.
//! * [`ReplayBackend`] serves recorded responses from a JSONL transcript.
//!
//! [`Generator`] puts a content-addressed [`ResponseCache`] and an in-flight
//! limit in front of any backend.

mod cache;
mod http;
mod replay;
mod stub;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cached_generate, ResponseCache};
pub use http::{HttpBackend, HttpConfig};
pub use replay::{write_transcript, ReplayBackend, TranscriptRecord, TranscriptRecorder};
pub use stub::{StubBackend, StubConfig};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("http generation failed after {attempts} attempt(s): {message}")]
    Http { attempts: u32, message: String },
    #[error("response has no string at `{path}`")]
    MissingField { path: String },
    #[error("no recorded response for prompt {digest}")]
    ReplayMiss { digest: String },
    #[error("{path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = LlmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub top_p: f64,
    pub top_k: u32,
    pub repetition_penalty: f64,
    pub temperature: f64,
}

impl Default for SamplingConfig {
    /// Nucleus sampling with p = 0.92, top-k 200, repetition penalty 1.2.
    fn default() -> Self {
        Self {
            top_p: 0.92,
            top_k: 200,
            repetition_penalty: 1.2,
            temperature: 1.0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::InvalidRequest(format!(
                "top_p {} not in (0, 1]",
                self.top_p
            )));
        }
        if self.top_k == 0 {
            return Err(LlmError::InvalidRequest("top_k must be positive".into()));
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "repetition_penalty {} < 1",
                self.repetition_penalty
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} < 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub sampling: SamplingConfig,
    pub max_new_tokens: u32,
    pub seed: Option<u64>,
}

impl GenRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            sampling: SamplingConfig::default(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: None,
        }
    }

    pub fn with_sampling(mut self, sampling: SamplingConfig) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_new_tokens(mut self, n: u32) -> Self {
        self.max_new_tokens = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_new_tokens must be positive".into(),
            ));
        }
        self.sampling.validate()
    }
}

/// Hex SHA-256 of a prompt; used to key replay transcripts.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub trait Backend: Send + Sync {
    /// Stable description of the backend and its configuration; part of
    /// every cache key.
    fn identity(&self) -> String;

    fn model(&self) -> &str;

    fn generate(&self, request: &GenRequest) -> Result<String>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn model(&self) -> &str {
        (**self).model()
    }

    fn generate(&self, request: &GenRequest) -> Result<String> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn model(&self) -> &str {
        (**self).model()
    }

    fn generate(&self, request: &GenRequest) -> Result<String> {
        (**self).generate(request)
    }
}

/// Serializable backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Http(HttpConfig),
    Stub(StubConfig),
    Replay { transcript: PathBuf },
}

impl BackendConfig {
    /// Instantiates the backend; relative fixture paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Arc<dyn Backend>> {
        Ok(match self {
            Self::Http(cfg) => Arc::new(HttpBackend::new(cfg.clone())),
            Self::Stub(cfg) => Arc::new(StubBackend::from_config(cfg, base)?),
            Self::Replay { transcript } => Arc::new(ReplayBackend::load(base.join(transcript))?),
        })
    }
}

/// Counting semaphore bounding concurrent backend calls.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            active: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.active.lock().unwrap();
        while *n >= self.limit {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub cache_key: String,
    pub cached: bool,
}

/// Backend plus optional cache, shared across worker threads.
pub struct Generator {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    in_flight: InFlight,
    backend_calls: AtomicU64,
}

impl Generator {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            cache: None,
            in_flight: InFlight::new(8),
            backend_calls: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.in_flight = InFlight::new(limit);
        self
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Number of requests that reached the backend.
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn generate(&self, request: &GenRequest) -> Result<Generation> {
        request.validate()?;
        let key = ResponseCache::key(self.backend.as_ref(), request);
        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(Generation {
                text,
                cache_key: key,
                cached: true,
            });
        }
        let text = {
            let _slot = self.in_flight.acquire();
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            self.backend.generate(request)?
        };
        if let Some(cache) = &self.cache {
            cache.put(&key, &text)?;
        }
        Ok(Generation {
            text,
            cache_key: key,
            cached: false,
        })
    }
}
