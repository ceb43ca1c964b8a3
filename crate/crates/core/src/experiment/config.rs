use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::corpus_io::{CorpusFormat, TopicFormat};
use crate::eval::MetricSpec;
use crate::index::{Analyzer, Bm25Params};
use crate::llm::BackendConfig;
use crate::prf::Rm3Params;
use crate::reformulate::{FeedbackMode, ReformulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Raw,
    Flanqr,
    Genqrensemble,
    Rm3,
    Flanprf,
    GenqrensembleRf,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Raw,
        Method::Flanqr,
        Method::Genqrensemble,
        Method::Rm3,
        Method::Flanprf,
        Method::GenqrensembleRf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Flanqr => "flanqr",
            Method::Genqrensemble => "genqrensemble",
            Method::Rm3 => "rm3",
            Method::Flanprf => "flanprf",
            Method::GenqrensembleRf => "genqrensemble_rf",
        }
    }

    pub fn uses_llm(self) -> bool {
        !matches!(self, Method::Raw | Method::Rm3)
    }

    /// Methods whose prompts carry feedback context. Other methods ignore
    /// the feedback mode (RM3 always uses feedback, oracle if so configured).
    pub fn uses_context(self) -> bool {
        matches!(self, Method::Flanprf | Method::GenqrensembleRf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_corpus_format")]
    pub corpus_format: CorpusFormat,
    pub topics: PathBuf,
    #[serde(default = "default_topic_format")]
    pub topic_format: TopicFormat,
    #[serde(default)]
    pub qrels: Option<PathBuf>,
    pub index: PathBuf,
}

fn default_corpus_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_topic_format() -> TopicFormat {
    TopicFormat::Tsv
}

/// External re-ranking hook; see [`super::rerank`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankerConfig {
    /// Program and arguments; the input and output file paths are appended.
    pub command: Vec<String>,
    #[serde(default = "default_rerank_depth")]
    pub depth: usize,
}

fn default_rerank_depth() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// One of `m`, `n`, `beta`, `fb_docs`, `fb_terms`, `lambda`, `mu`, `k1`, `b`.
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::Config(
                "sweep needs at least one value".into(),
            ));
        }
        let mut probe = ExperimentConfig::template();
        for &v in &self.values {
            apply_param(&mut probe, &self.param, v)?;
        }
        Ok(())
    }
}

fn as_count(param: &str, v: f64) -> Result<usize, ExperimentError> {
    if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(ExperimentError::Config(format!(
            "{param} must be a non-negative integer, got {v}"
        )))
    }
}

/// Sets one named parameter on `config`.
pub fn apply_param(
    config: &mut ExperimentConfig,
    param: &str,
    v: f64,
) -> Result<(), ExperimentError> {
    match param {
        "m" => config.reformulation.m = as_count(param, v)?,
        "n" => config.reformulation.n = Some(as_count(param, v)?),
        "beta" => config.reformulation.beta = v,
        "fb_docs" => config.rm3.fb_docs = as_count(param, v)?,
        "fb_terms" => config.rm3.fb_terms = as_count(param, v)?,
        "lambda" => config.rm3.lambda = v,
        "mu" => config.rm3.mu = v,
        "k1" => config.bm25.k1 = v,
        "b" => config.bm25.b = v,
        other => return Err(ExperimentError::Config(format!("cannot sweep `{other}`"))),
    }
    Ok(())
}

fn default_depth() -> usize {
    1000
}

fn default_metrics() -> Vec<MetricSpec> {
    vec![
        MetricSpec::ndcg(10),
        MetricSpec::map(),
        MetricSpec::mrr(),
        MetricSpec::precision(10),
    ]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_max_in_flight() -> usize {
    8
}

/// One experiment, usually read from a TOML file. Relative paths are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Run tag written into the TREC run; defaults to the method name.
    #[serde(default)]
    pub tag: Option<String>,
    pub data: DataConfig,
    pub output: PathBuf,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Instruction file; the bundled ten-instruction set when absent.
    #[serde(default)]
    pub instructions: Option<PathBuf>,
    /// Worker threads for per-query processing; 0 picks the core count.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Record failed queries and continue instead of aborting.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub analyzer: Analyzer,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub reformulation: ReformulationConfig,
    #[serde(default)]
    pub rm3: Rm3Params,
    #[serde(default)]
    pub backend: Option<BackendConfig>,
    /// Response cache directory; caching is off when absent.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    /// Write every prompt/response pair of the run to this JSONL file.
    #[serde(default)]
    pub record_transcript: Option<PathBuf>,
    #[serde(default)]
    pub reranker: Option<RerankerConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    fn template() -> Self {
        Self {
            method: Method::Raw,
            tag: None,
            data: DataConfig {
                corpus: PathBuf::new(),
                corpus_format: default_corpus_format(),
                topics: PathBuf::new(),
                topic_format: default_topic_format(),
                qrels: None,
                index: PathBuf::new(),
            },
            output: PathBuf::new(),
            depth: default_depth(),
            metrics: default_metrics(),
            alpha: default_alpha(),
            instructions: None,
            threads: 0,
            max_in_flight: default_max_in_flight(),
            lenient: false,
            analyzer: Analyzer::default(),
            bm25: Bm25Params::default(),
            reformulation: ReformulationConfig::default(),
            rm3: Rm3Params::default(),
            backend: None,
            cache: None,
            record_transcript: None,
            reranker: None,
            sweep: None,
        }
    }

    /// A config for `method` over the given files with every other setting
    /// at its default.
    pub fn new(
        method: Method,
        corpus: impl Into<PathBuf>,
        topics: impl Into<PathBuf>,
        index: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
    ) -> Self {
        let mut c = Self::template();
        c.method = method;
        c.data.corpus = corpus.into();
        c.data.topics = topics.into();
        c.data.index = index.into();
        c.output = output.into();
        c
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ExperimentError::Config(m) => {
                ExperimentError::Config(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.corpus);
        fix(&mut self.data.topics);
        fix(&mut self.data.index);
        fix(&mut self.output);
        self.data.qrels.as_mut().map(fix);
        self.instructions.as_mut().map(fix);
        self.cache.as_mut().map(fix);
        self.record_transcript.as_mut().map(fix);
        match &mut self.backend {
            Some(BackendConfig::Stub(s)) => {
                s.thesaurus.as_mut().map(fix);
                s.vocabulary.as_mut().map(fix);
            }
            Some(BackendConfig::Replay { transcript }) => fix(transcript),
            _ => {}
        }
    }

    pub fn tag(&self) -> String {
        self.tag
            .clone()
            .unwrap_or_else(|| self.method.name().to_string())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        if self.depth == 0 {
            return err("depth must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        for m in &self.metrics {
            m.validate()?;
        }
        self.reformulation.validate()?;
        let fb = self.reformulation.feedback;
        if self.method.uses_llm() && self.backend.is_none() {
            return err(format!(
                "method `{}` needs a [backend] section",
                self.method
            ));
        }
        if self.method.uses_context() && fb == FeedbackMode::None {
            return err(format!(
                "method `{}` needs reformulation.feedback = \"pseudo\" or \"oracle\"",
                self.method
            ));
        }
        if fb == FeedbackMode::Oracle && self.data.qrels.is_none() {
            return err("oracle feedback needs data.qrels".into());
        }
        if !(0.0..=1.0).contains(&self.rm3.lambda) {
            return err(format!(
                "rm3.lambda must lie in [0, 1], got {}",
                self.rm3.lambda
            ));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(r) = &self.reranker {
            if r.command.is_empty() {
                return err("reranker.command is empty".into());
            }
        }
        Ok(())
    }
}
