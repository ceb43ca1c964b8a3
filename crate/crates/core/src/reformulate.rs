//! Ensemble-prompted query reformulation.
//!
//! Every instruction of an [`InstructionSet`] is prompted together with the
//! query, each generation is parsed into keywords, and all keywords are
//! appended to the original query ([`fuse`]). The single-instruction case is
//! the plain zero-shot reformulator ([`flan_qr`]). The feedback variant
//! prefixes every instruction with a context string built from feedback
//! documents.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::Topic;
use crate::index::{Analyzer, WeightedQuery};
use crate::llm::{
    GenRequest, Generation, Generator, LlmError, SamplingConfig, DEFAULT_MAX_NEW_TOKENS,
};
use crate::prf::FeedbackSet;

/// Instruction used to ask for paraphrases of the base instruction.
pub const PARAPHRASE_PROMPT: &str = "Generate {count} paraphrases for the following instruction:";

/// Prefix placed before every instruction in the feedback variant.
pub const CONTEXT_PREFIX: &str = "Based on the given context information ";

pub const DEFAULT_TEMPLATE: &str = "{instruction}: {query}";

const BUNDLED_INSTRUCTIONS: &str = include_str!("../data/instructions.txt");

#[derive(Debug, Error)]
pub enum ReformulateError {
    #[error("generation for instruction #{index} failed: {source}")]
    Generation {
        index: usize,
        #[source]
        source: LlmError,
    },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("paraphrase response yielded {found} usable paraphrase(s), {needed} needed")]
    TooFewParaphrases { found: usize, needed: usize },
    #[error("reformulated query for `{0}` has no positively weighted term")]
    Degenerate(String),
    #[error("invalid instruction set: {0}")]
    InvalidInstructions(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ReformulateError> = std::result::Result<T, E>;

/// The base instruction followed by its paraphrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSet {
    instructions: Vec<String>,
}

impl InstructionSet {
    pub fn new(instructions: Vec<String>) -> Result<Self> {
        if instructions.is_empty() {
            return Err(ReformulateError::InvalidInstructions(
                "no instructions".into(),
            ));
        }
        let mut seen = HashSet::new();
        for ins in &instructions {
            if ins.trim().is_empty() {
                return Err(ReformulateError::InvalidInstructions(
                    "empty instruction".into(),
                ));
            }
            if !seen.insert(ins.as_str()) {
                return Err(ReformulateError::InvalidInstructions(format!(
                    "duplicate instruction `{ins}`"
                )));
            }
        }
        Ok(Self { instructions })
    }

    /// The ten-instruction set shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_INSTRUCTIONS).expect("bundled instruction file is valid")
    }

    /// One instruction per non-blank line.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ReformulateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut body = self.instructions.join("\n");
        body.push('\n');
        std::fs::write(path, body).map_err(|source| ReformulateError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn base(&self) -> &str {
        &self.instructions[0]
    }

    pub fn paraphrases(&self) -> &[String] {
        &self.instructions[1..]
    }

    pub fn all(&self) -> &[String] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The first `n` instructions.
    pub fn take(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(ReformulateError::InvalidConfig(format!(
                "N = {n} but the instruction set has {} instruction(s)",
                self.len()
            )));
        }
        Ok(Self {
            instructions: self.instructions[..n].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeywordParser {
    /// The raw generation is analyzed as one text.
    #[default]
    RawAppend,
    /// The generation is split on whitespace and list markers such as
    /// `1.` or `-` are dropped before analysis.
    Whitespace,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    #[default]
    None,
    Pseudo,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReformulationConfig {
    /// Number of instructions to use; `None` uses the whole set.
    pub n: Option<usize>,
    /// Weight of each expansion-token occurrence; original tokens weigh 1.
    pub beta: f64,
    pub dedup: bool,
    pub keyword_parser: KeywordParser,
    pub feedback: FeedbackMode,
    /// Feedback documents per query.
    pub m: usize,
    /// Prompt template with `{instruction}` and `{query}` placeholders.
    pub template: String,
    /// Maximum characters of feedback context.
    pub context_budget: usize,
    pub sampling: SamplingConfig,
    pub max_new_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for ReformulationConfig {
    fn default() -> Self {
        Self {
            n: None,
            beta: 1.0,
            dedup: false,
            keyword_parser: KeywordParser::RawAppend,
            feedback: FeedbackMode::None,
            m: 5,
            template: DEFAULT_TEMPLATE.into(),
            context_budget: 4000,
            sampling: SamplingConfig::default(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: None,
        }
    }
}

impl ReformulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ReformulateError::InvalidConfig(format!(
                "beta must be finite and non-negative, got {}",
                self.beta
            )));
        }
        if self.n == Some(0) {
            return Err(ReformulateError::InvalidConfig(
                "N must be at least 1".into(),
            ));
        }
        if !self.template.contains("{instruction}") || !self.template.contains("{query}") {
            return Err(ReformulateError::InvalidConfig(
                "template needs {instruction} and {query} placeholders".into(),
            ));
        }
        Ok(())
    }

    fn request(&self, prompt: String) -> GenRequest {
        GenRequest::new(prompt)
            .with_sampling(self.sampling)
            .with_max_new_tokens(self.max_new_tokens)
            .with_seed(self.seed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    /// 1-based indices into the instruction set, one per keyword string.
    pub instructions: Vec<usize>,
    pub prompts: Vec<String>,
    pub backend: String,
    pub cache_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feedback_docnos: Vec<String>,
    /// Expansion term -> instructions whose generation contained it.
    pub term_sources: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reformulation {
    pub qid: String,
    pub original: String,
    pub keywords: Vec<String>,
    pub fused: WeightedQuery,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct FusedTerm {
    term: String,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct ReformulationRecord {
    qid: String,
    original: String,
    keywords: Vec<String>,
    fused_terms: Vec<FusedTerm>,
    provenance: Provenance,
}

/// Writes reformulations as JSONL, one object per query.
pub fn write_reformulations<W: Write>(items: &[Reformulation], mut out: W) -> std::io::Result<()> {
    for r in items {
        let rec = ReformulationRecord {
            qid: r.qid.clone(),
            original: r.original.clone(),
            keywords: r.keywords.clone(),
            fused_terms: r
                .fused
                .terms
                .iter()
                .map(|(term, weight)| FusedTerm {
                    term: term.clone(),
                    weight: *weight,
                })
                .collect(),
            provenance: r.provenance.clone(),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&rec).expect("record serializes")
        )?;
    }
    out.flush()
}

/// Parses reformulation JSONL written by [`write_reformulations`].
pub fn read_reformulations(text: &str) -> serde_json::Result<Vec<Reformulation>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: ReformulationRecord = serde_json::from_str(l)?;
            Ok(Reformulation {
                fused: WeightedQuery::new(
                    rec.qid.clone(),
                    rec.fused_terms
                        .into_iter()
                        .map(|f| (f.term, f.weight))
                        .collect(),
                ),
                qid: rec.qid,
                original: rec.original,
                keywords: rec.keywords,
                provenance: rec.provenance,
            })
        })
        .collect()
}

/// Splits a paraphrase response into instructions: one per line, with
/// enumeration markers and surrounding quotes removed.
pub fn parse_paraphrases(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| {
            let mut s = line.trim();
            let digits = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
            if digits > 0 {
                if let Some(rest) = s[digits..].strip_prefix(['.', ')', ':']) {
                    s = rest;
                }
            }
            s = s.trim_start_matches(['-', '*', '•']).trim();
            s.trim_matches(['"', '\'', '`', '“', '”'])
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Builds an instruction set from `base` plus `count - 1` generated
/// paraphrases. `count == 1` makes no backend call.
pub fn paraphrase_instructions(
    generator: &Generator,
    base: &str,
    count: usize,
    config: &ReformulationConfig,
) -> Result<InstructionSet> {
    if count == 0 {
        return Err(ReformulateError::InvalidConfig(
            "count must be at least 1".into(),
        ));
    }
    if count == 1 {
        return InstructionSet::new(vec![base.to_string()]);
    }
    let prompt = format!(
        "{} {}",
        PARAPHRASE_PROMPT.replace("{count}", &count.to_string()),
        base
    );
    let generation = generator.generate(&config.request(prompt))?;
    let mut seen: HashSet<String> = HashSet::from([base.to_string()]);
    let mut instructions = vec![base.to_string()];
    for p in parse_paraphrases(&generation.text) {
        if instructions.len() == count {
            break;
        }
        if seen.insert(p.clone()) {
            instructions.push(p);
        }
    }
    if instructions.len() < count {
        return Err(ReformulateError::TooFewParaphrases {
            found: instructions.len() - 1,
            needed: count - 1,
        });
    }
    InstructionSet::new(instructions)
}

pub fn keyword_prompt(template: &str, instruction: &str, query: &str) -> String {
    template
        .replace("{instruction}", instruction)
        .replace("{query}", query)
}

/// Prompts one instruction with the query and returns the raw generation.
pub fn generate_keywords(
    generator: &Generator,
    instruction: &str,
    query: &Topic,
    config: &ReformulationConfig,
) -> Result<Generation> {
    let prompt = keyword_prompt(&config.template, instruction, &query.query);
    Ok(generator.generate(&config.request(prompt))?)
}

fn keyword_tokens(text: &str, parser: KeywordParser, analyzer: &Analyzer) -> Vec<String> {
    match parser {
        KeywordParser::RawAppend => analyzer.analyze(text),
        KeywordParser::Whitespace => text
            .split_whitespace()
            .filter(|piece| {
                let marker = piece.trim_end_matches(['.', ')', ':']);
                !(marker.is_empty() && !piece.is_empty()
                    || marker.chars().all(|c| c.is_ascii_digit()) && marker.len() < piece.len()
                    || matches!(*piece, "-" | "*" | "•"))
            })
            .flat_map(|piece| analyzer.analyze(piece))
            .collect(),
    }
}

/// Appends expansion keywords to the original query.
///
/// Original tokens weigh 1.0 per occurrence and expansion tokens `beta` per
/// occurrence; a term in both accumulates both. With `dedup`, each distinct
/// expansion token counts once. Terms are listed in first-appearance order,
/// original tokens first; zero-weight terms are dropped.
pub fn fuse(
    original: &Topic,
    keywords: &[String],
    config: &ReformulationConfig,
    analyzer: &Analyzer,
) -> Result<WeightedQuery> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, (u32, u32)> = HashMap::new();
    for t in analyzer.analyze(&original.query) {
        let slot = counts.entry(t.clone()).or_insert_with(|| {
            order.push(t);
            (0, 0)
        });
        slot.0 += 1;
    }
    let mut expanded: HashSet<String> = HashSet::new();
    for k in keywords {
        for t in keyword_tokens(k, config.keyword_parser, analyzer) {
            if config.dedup && !expanded.insert(t.clone()) {
                continue;
            }
            let slot = counts.entry(t.clone()).or_insert_with(|| {
                order.push(t);
                (0, 0)
            });
            slot.1 += 1;
        }
    }
    let terms: Vec<(String, f64)> = order
        .into_iter()
        .filter_map(|t| {
            let (o, e) = counts[&t];
            let w = f64::from(o) + config.beta * f64::from(e);
            (w > 0.0).then_some((t, w))
        })
        .collect();
    if terms.is_empty() {
        return Err(ReformulateError::Degenerate(original.qid.clone()));
    }
    Ok(WeightedQuery::new(original.qid.clone(), terms))
}

fn term_sources(
    keywords: &[String],
    indices: &[usize],
    config: &ReformulationConfig,
    analyzer: &Analyzer,
    fused: &WeightedQuery,
) -> BTreeMap<String, Vec<usize>> {
    let kept: HashSet<&str> = fused.terms.iter().map(|(t, _)| t.as_str()).collect();
    let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (k, idx) in keywords.iter().zip(indices) {
        for t in keyword_tokens(k, config.keyword_parser, analyzer) {
            if kept.contains(t.as_str()) {
                out.entry(t).or_default().insert(*idx);
            }
        }
    }
    out.into_iter()
        .map(|(t, s)| (t, s.into_iter().collect()))
        .collect()
}

fn run_instructions(
    generator: &Generator,
    instructions: &[String],
    query: &Topic,
    config: &ReformulationConfig,
) -> Result<Vec<(String, Generation)>> {
    let results: Vec<Result<(String, Generation)>> = instructions
        .par_iter()
        .enumerate()
        .map(|(i, ins)| {
            let prompt = keyword_prompt(&config.template, ins, &query.query);
            generator
                .generate(&config.request(prompt.clone()))
                .map(|g| (prompt, g))
                .map_err(|source| ReformulateError::Generation {
                    index: i + 1,
                    source,
                })
        })
        .collect();
    results.into_iter().collect()
}

fn assemble(
    method: &str,
    generator: &Generator,
    query: &Topic,
    outputs: Vec<(String, Generation)>,
    config: &ReformulationConfig,
    analyzer: &Analyzer,
) -> Result<Reformulation> {
    let indices: Vec<usize> = (1..=outputs.len()).collect();
    let (prompts, gens): (Vec<String>, Vec<Generation>) = outputs.into_iter().unzip();
    let keywords: Vec<String> = gens.iter().map(|g| g.text.clone()).collect();
    let fused = fuse(query, &keywords, config, analyzer)?;
    let term_sources = term_sources(&keywords, &indices, config, analyzer, &fused);
    Ok(Reformulation {
        qid: query.qid.clone(),
        original: query.query.clone(),
        keywords,
        fused,
        provenance: Provenance {
            method: method.to_string(),
            instructions: indices,
            prompts,
            backend: generator.backend().identity(),
            cache_keys: gens.into_iter().map(|g| g.cache_key).collect(),
            term_sources,
            ..Provenance::default()
        },
    })
}

/// Ensemble reformulation over the first `config.n` instructions.
pub fn genqr_ensemble(
    generator: &Generator,
    instructions: &InstructionSet,
    query: &Topic,
    config: &ReformulationConfig,
    analyzer: &Analyzer,
) -> Result<Reformulation> {
    config.validate()?;
    let set = instructions.take(config.n.unwrap_or(instructions.len()))?;
    let outputs = run_instructions(generator, set.all(), query, config)?;
    assemble("genqrensemble", generator, query, outputs, config, analyzer)
}

/// Single-instruction zero-shot reformulation with `instruction`.
pub fn flan_qr(
    generator: &Generator,
    instruction: &str,
    query: &Topic,
    config: &ReformulationConfig,
    analyzer: &Analyzer,
) -> Result<Reformulation> {
    config.validate()?;
    let generation =
        generate_keywords(generator, instruction, query, config).map_err(|e| match e {
            ReformulateError::Llm(source) => ReformulateError::Generation { index: 1, source },
            other => other,
        })?;
    let prompt = keyword_prompt(&config.template, instruction, &query.query);
    assemble(
        "flanqr",
        generator,
        query,
        vec![(prompt, generation)],
        config,
        analyzer,
    )
}

/// Space-joined feedback texts, cut to `budget` characters.
pub fn feedback_context(feedback: &FeedbackSet, budget: usize) -> (String, Option<String>) {
    let joined = feedback.texts().collect::<Vec<_>>().join(" ");
    let chars = joined.chars().count();
    if chars <= budget {
        return (joined, None);
    }
    let cut: String = joined.chars().take(budget).collect();
    (
        cut,
        Some(format!(
            "feedback context truncated from {chars} to {budget} characters"
        )),
    )
}

/// Feedback variant: every instruction is prefixed with the feedback
/// context. Empty feedback reduces to [`genqr_ensemble`].
pub fn genqr_ensemble_rf(
    generator: &Generator,
    instructions: &InstructionSet,
    query: &Topic,
    feedback: &FeedbackSet,
    config: &ReformulationConfig,
    analyzer: &Analyzer,
) -> Result<Reformulation> {
    if feedback.is_empty() {
        return genqr_ensemble(generator, instructions, query, config, analyzer);
    }
    config.validate()?;
    let set = instructions.take(config.n.unwrap_or(instructions.len()))?;
    let (context, warning) = feedback_context(feedback, config.context_budget);
    let prefixed: Vec<String> = set
        .all()
        .iter()
        .map(|ins| format!("{CONTEXT_PREFIX}{context}, {ins}"))
        .collect();
    let outputs = run_instructions(generator, &prefixed, query, config)?;
    let mut r = assemble(
        "genqrensemble_rf",
        generator,
        query,
        outputs,
        config,
        analyzer,
    )?;
    r.provenance.context = Some(context);
    r.provenance.feedback_docnos = feedback.docs.iter().map(|d| d.docno.clone()).collect();
    r.provenance.warnings.extend(warning);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ReplayBackend, StubBackend, TranscriptRecord};
    use crate::prf::{FeedbackDoc, FeedbackSource};
    use std::sync::Arc;

    fn cfg() -> ReformulationConfig {
        ReformulationConfig::default()
    }

    fn stub_generator() -> Generator {
        let mut t = BTreeMap::new();
        t.insert(
            "goldfish".to_string(),
            ["carp", "koi", "pond", "fins", "aquarium", "scales"]
                .map(String::from)
                .to_vec(),
        );
        Generator::new(Arc::new(StubBackend::new(t, vec![], 2, 5).unwrap()))
    }

    #[test]
    fn bundled_set_has_ten_instructions() {
        let set = InstructionSet::bundled();
        assert_eq!(set.len(), 10);
        assert_eq!(
            set.base(),
            "Improve the search effectiveness by suggesting expansion terms for the query"
        );
        assert_eq!(
            set.paraphrases()[0],
            "Recommend expansion terms for the query to improve search results"
        );
    }

    #[test]
    fn instruction_set_invariants() {
        assert!(InstructionSet::new(vec![]).is_err());
        assert!(InstructionSet::new(vec!["a".into(), "a".into()]).is_err());
        assert!(InstructionSet::new(vec!["a".into(), " ".into()]).is_err());
        assert!(InstructionSet::bundled().take(11).is_err());
        assert_eq!(InstructionSet::bundled().take(3).unwrap().len(), 3);
    }

    #[test]
    fn fuse_counts_occurrences() {
        let w = fuse(
            &Topic::new("q", "a b"),
            &["c c".into(), "b".into()],
            &cfg(),
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(
            w.terms,
            vec![("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 2.0)]
        );
    }

    #[test]
    fn fuse_identity_and_beta_zero() {
        let topic = Topic::new("q", "do goldfish grow");
        let plain = fuse(
            &topic,
            &["".into(), "".into()],
            &cfg(),
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(
            plain.terms,
            vec![
                ("do".into(), 1.0),
                ("goldfish".into(), 1.0),
                ("grow".into(), 1.0)
            ]
        );
        let zero = ReformulationConfig { beta: 0.0, ..cfg() };
        let w = fuse(&topic, &["carp koi".into()], &zero, &Analyzer::default()).unwrap();
        assert_eq!(w, plain);
    }

    #[test]
    fn fuse_dedup_and_beta() {
        let c = ReformulationConfig {
            dedup: true,
            beta: 0.05,
            ..cfg()
        };
        let w = fuse(
            &Topic::new("q", "a"),
            &["b b a".into(), "b c".into()],
            &c,
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(w.weight("a"), 1.05);
        assert_eq!(w.weight("b"), 0.05);
        assert_eq!(w.weight("c"), 0.05);
    }

    #[test]
    fn fuse_degenerate() {
        let err = fuse(
            &Topic::new("q", "?!"),
            &["".into()],
            &cfg(),
            &Analyzer::default(),
        );
        assert!(matches!(err, Err(ReformulateError::Degenerate(_))));
    }

    #[test]
    fn whitespace_parser_drops_list_markers() {
        let c = ReformulationConfig {
            keyword_parser: KeywordParser::Whitespace,
            ..cfg()
        };
        let w = fuse(
            &Topic::new("q", "x"),
            &["1. carp\n2) koi - 3: pond 1990".into()],
            &c,
            &Analyzer::default(),
        )
        .unwrap();
        let terms: Vec<&str> = w.terms.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(terms, vec!["x", "carp", "koi", "pond", "1990"]);
    }

    #[test]
    fn paraphrase_parsing() {
        let got = parse_paraphrases("1. First one\n2) \"Second\"\n\n- third\n* fourth\n");
        assert_eq!(got, vec!["First one", "Second", "third", "fourth"]);
    }

    #[test]
    fn single_instruction_needs_no_backend_call() {
        let g = stub_generator();
        let set = paraphrase_instructions(&g, "base", 1, &cfg()).unwrap();
        assert_eq!(set.all(), &["base".to_string()]);
        assert_eq!(g.backend_calls(), 0);
    }

    #[test]
    fn too_few_paraphrases_reported() {
        let base = "Improve things";
        let prompt = format!("Generate 4 paraphrases for the following instruction: {base}");
        let g = Generator::new(Arc::new(
            ReplayBackend::from_records([TranscriptRecord::new(prompt, "1. a\n2. b\n3. a")])
                .unwrap(),
        ));
        let err = paraphrase_instructions(&g, base, 4, &cfg()).unwrap_err();
        assert!(matches!(
            err,
            ReformulateError::TooFewParaphrases {
                found: 2,
                needed: 3
            }
        ));
    }

    #[test]
    fn ensemble_records_provenance() {
        let g = stub_generator();
        let set = InstructionSet::bundled();
        let r = genqr_ensemble(
            &g,
            &set,
            &Topic::new("1", "goldfish"),
            &ReformulationConfig {
                n: Some(3),
                ..cfg()
            },
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(r.keywords.len(), 3);
        assert_eq!(r.provenance.instructions, vec![1, 2, 3]);
        assert_eq!(g.backend_calls(), 3);
        for (term, _) in r.fused.terms.iter().filter(|(t, _)| t != "goldfish") {
            assert!(!r.provenance.term_sources[term].is_empty());
        }
    }

    #[test]
    fn empty_generation_contributes_nothing() {
        let set = InstructionSet::new(vec!["I".into()]).unwrap();
        let g = Generator::new(Arc::new(
            ReplayBackend::from_records([TranscriptRecord::new("I: q", "")]).unwrap(),
        ));
        let r = genqr_ensemble(
            &g,
            &set,
            &Topic::new("1", "q"),
            &cfg(),
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(r.keywords, vec![String::new()]);
        assert_eq!(r.fused.terms, vec![("q".into(), 1.0)]);
    }

    #[test]
    fn generation_failure_names_instruction() {
        let set = InstructionSet::new(vec!["I".into(), "J".into()]).unwrap();
        let g = Generator::new(Arc::new(
            ReplayBackend::from_records([TranscriptRecord::new("I: q", "x")]).unwrap(),
        ));
        let err = genqr_ensemble(
            &g,
            &set,
            &Topic::new("1", "q"),
            &cfg(),
            &Analyzer::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ReformulateError::Generation { index: 2, .. }));
    }

    fn feedback(texts: &[&str]) -> FeedbackSet {
        FeedbackSet {
            qid: "1".into(),
            source: FeedbackSource::Pseudo,
            docs: texts
                .iter()
                .enumerate()
                .map(|(i, t)| FeedbackDoc {
                    docno: format!("d{i}"),
                    text: t.to_string(),
                    evidence: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn context_is_space_joined_and_truncated() {
        assert_eq!(
            feedback_context(&feedback(&["a b", "c"]), 100),
            ("a b c".into(), None)
        );
        let (c, w) = feedback_context(&feedback(&["ééé", "xyz"]), 5);
        assert_eq!(c, "ééé x");
        assert!(w.unwrap().contains("truncated"));
    }

    #[test]
    fn rf_prompt_prefixes_context() {
        let g = stub_generator();
        let r = genqr_ensemble_rf(
            &g,
            &InstructionSet::bundled(),
            &Topic::new("1", "do goldfish grow"),
            &feedback(&["goldfish live long"]),
            &ReformulationConfig {
                n: Some(1),
                ..cfg()
            },
            &Analyzer::default(),
        )
        .unwrap();
        assert_eq!(
            r.provenance.prompts[0],
            "Based on the given context information goldfish live long, Improve the search \
             effectiveness by suggesting expansion terms for the query: do goldfish grow"
        );
        assert_eq!(r.provenance.feedback_docnos, vec!["d0"]);
    }

    #[test]
    fn rf_with_empty_feedback_is_plain_ensemble() {
        let g = stub_generator();
        let set = InstructionSet::bundled();
        let topic = Topic::new("1", "goldfish");
        let c = ReformulationConfig {
            n: Some(4),
            ..cfg()
        };
        let a = genqr_ensemble(&g, &set, &topic, &c, &Analyzer::default()).unwrap();
        let b =
            genqr_ensemble_rf(&g, &set, &topic, &feedback(&[]), &c, &Analyzer::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jsonl_round_trip() {
        let g = stub_generator();
        let r = genqr_ensemble(
            &g,
            &InstructionSet::bundled(),
            &Topic::new("1", "goldfish"),
            &cfg(),
            &Analyzer::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_reformulations(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("{\"qid\":\"1\",\"original\":\"goldfish\",\"keywords\":["));
        assert_eq!(read_reformulations(&text).unwrap(), vec![r]);
    }
}
