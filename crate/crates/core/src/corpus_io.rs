//! Corpus, topic, qrels and TREC run-file I/O.
//!
//! Corpora are streamed record by record so that indexing does not need the
//! whole collection in memory. Run files use the six-column TREC layout
//! `qid Q0 docno rank score tag` with scores printed at six decimals.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate docno `{0}`")]
    DuplicateDocno(String),
    #[error("duplicate qid `{0}`")]
    DuplicateQid(String),
    #[error("topic `{0}` has an empty query")]
    EmptyQuery(String),
    #[error("duplicate judgment for qid `{qid}`, docno `{docno}`")]
    DuplicateJudgment { qid: String, docno: String },
    #[error("invalid run for qid `{qid}`: {message}")]
    InvalidRun { qid: String, message: String },
    #[error("unknown {what} format `{value}`")]
    UnknownFormat { what: &'static str, value: String },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::Malformed {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub docno: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Document {
    pub fn new(docno: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            docno: docno.into(),
            text: text.into(),
            title: None,
        }
    }

    /// Title and body joined by a single space; this is what gets indexed
    /// and what is used as feedback context.
    pub fn full_text(&self) -> String {
        match self.title.as_deref() {
            Some(t) if !t.trim().is_empty() => format!("{} {}", t, self.text),
            _ => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub qid: String,
    pub query: String,
}

impl Topic {
    pub fn new(qid: impl Into<String>, query: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            query: query.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
    TrecText,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "tsv" => Ok(Self::Tsv),
            "trec-text" | "trec" => Ok(Self::TrecText),
            _ => Err(CorpusError::UnknownFormat {
                what: "corpus",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopicFormat {
    Tsv,
    TrecTopic,
}

impl FromStr for TopicFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "trec-topic" | "trec" => Ok(Self::TrecTopic),
            _ => Err(CorpusError::UnknownFormat {
                what: "topic",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    docno: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    title: Option<String>,
}

/// Streaming corpus reader. Yields documents in file order and rejects
/// duplicate docnos as they are encountered.
pub struct CorpusReader {
    path: PathBuf,
    format: CorpusFormat,
    lines: Lines<BufReader<File>>,
    line_no: usize,
    seen: HashSet<String>,
    done: bool,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<CorpusReader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(CorpusReader {
        path: path.to_path_buf(),
        format,
        lines: BufReader::new(file).lines(),
        line_no: 0,
        seen: HashSet::new(),
        done: false,
    })
}

impl CorpusReader {
    fn next_line(&mut self) -> Option<Result<String>> {
        let line = self.lines.next()?;
        self.line_no += 1;
        Some(line.map_err(|e| CorpusError::io(&self.path, e)))
    }

    fn next_record(&mut self) -> Option<Result<Document>> {
        match self.format {
            CorpusFormat::Jsonl => loop {
                let line = match self.next_line()? {
                    Ok(l) => l,
                    Err(e) => return Some(Err(e)),
                };
                if line.trim().is_empty() {
                    continue;
                }
                return Some(
                    serde_json::from_str::<JsonDoc>(&line)
                        .map(|d| Document {
                            docno: d.docno,
                            text: d.text,
                            title: d.title,
                        })
                        .map_err(|e| {
                            CorpusError::malformed(&self.path, self.line_no, e.to_string())
                        }),
                );
            },
            CorpusFormat::Tsv => loop {
                let line = match self.next_line()? {
                    Ok(l) => l,
                    Err(e) => return Some(Err(e)),
                };
                if line.trim().is_empty() {
                    continue;
                }
                let Some((docno, text)) = line.split_once('\t') else {
                    return Some(Err(CorpusError::malformed(
                        &self.path,
                        self.line_no,
                        "expected `docno<TAB>text`",
                    )));
                };
                return Some(Ok(Document::new(docno.trim(), text)));
            },
            CorpusFormat::TrecText => self.next_trec_doc(),
        }
    }

    fn next_trec_doc(&mut self) -> Option<Result<Document>> {
        // Find <DOC>.
        let start = loop {
            let line = match self.next_line()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e)),
            };
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if t.eq_ignore_ascii_case("<DOC>") {
                break self.line_no;
            }
            return Some(Err(CorpusError::malformed(
                &self.path,
                self.line_no,
                format!("expected <DOC>, found `{t}`"),
            )));
        };
        let mut body = String::new();
        loop {
            let line = match self.next_line() {
                Some(Ok(l)) => l,
                Some(Err(e)) => return Some(Err(e)),
                None => {
                    return Some(Err(CorpusError::malformed(
                        &self.path,
                        start,
                        "unterminated <DOC>",
                    )))
                }
            };
            if line.trim().eq_ignore_ascii_case("</DOC>") {
                break;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let Some(docno) = tag_content(&body, "DOCNO") else {
            return Some(Err(CorpusError::malformed(
                &self.path,
                start,
                "missing <DOCNO>",
            )));
        };
        let text = tag_content(&body, "TEXT").unwrap_or_default();
        let title = tag_content(&body, "TITLE").or_else(|| tag_content(&body, "HEADLINE"));
        Some(Ok(Document {
            docno: docno.trim().to_string(),
            text: collapse_ws(&text),
            title: title.map(|t| collapse_ws(&t)),
        }))
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record();
        match &item {
            Some(Ok(doc)) => {
                if doc.docno.is_empty() {
                    self.done = true;
                    return Some(Err(CorpusError::malformed(
                        &self.path,
                        self.line_no,
                        "empty docno",
                    )));
                }
                if !self.seen.insert(doc.docno.clone()) {
                    self.done = true;
                    return Some(Err(CorpusError::DuplicateDocno(doc.docno.clone())));
                }
            }
            Some(Err(_)) | None => self.done = true,
        }
        item
    }
}

fn tag_content(body: &str, tag: &str) -> Option<String> {
    let upper = body.to_ascii_uppercase();
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let s = upper.find(&open)? + open.len();
    let e = upper[s..].find(&close).map(|e| s + e).unwrap_or(body.len());
    Some(body[s..e].to_string())
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Random-access document lookup used for feedback selection.
#[derive(Debug, Default, Clone)]
pub struct DocStore {
    docs: HashMap<String, Document>,
}

impl DocStore {
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Self {
        Self {
            docs: docs.into_iter().map(|d| (d.docno.clone(), d)).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Self> {
        let docs = load_corpus(path, format)?.collect::<Result<Vec<_>>>()?;
        Ok(Self::from_documents(docs))
    }

    pub fn get(&self, docno: &str) -> Option<&Document> {
        self.docs.get(docno)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Loads topics. For `trec-topic` files the `<title>` field is used as the
/// query and the `<num>` field (with any `Number:` prefix removed) as qid.
pub fn load_topics(path: impl AsRef<Path>, format: TopicFormat) -> Result<Vec<Topic>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let raw = match format {
        TopicFormat::Tsv => parse_tsv_topics(path, &content)?,
        TopicFormat::TrecTopic => parse_trec_topics(path, &content)?,
    };
    let mut seen = HashSet::new();
    let mut topics = Vec::with_capacity(raw.len());
    for t in raw {
        if !seen.insert(t.qid.clone()) {
            return Err(CorpusError::DuplicateQid(t.qid));
        }
        let query = t.query.trim();
        if query.is_empty() {
            return Err(CorpusError::EmptyQuery(t.qid));
        }
        topics.push(Topic::new(t.qid, query));
    }
    Ok(topics)
}

fn parse_tsv_topics(path: &Path, content: &str) -> Result<Vec<Topic>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, query)) = line.split_once('\t') else {
            return Err(CorpusError::malformed(
                path,
                i + 1,
                "expected `qid<TAB>query`",
            ));
        };
        out.push(Topic::new(qid.trim(), query));
    }
    Ok(out)
}

fn parse_trec_topics(path: &Path, content: &str) -> Result<Vec<Topic>> {
    #[derive(Default)]
    struct Pending {
        qid: Option<String>,
        title: Option<String>,
        in_title: bool,
        start: usize,
    }

    let mut out = Vec::new();
    let mut cur: Option<Pending> = None;
    for (i, line) in content.lines().enumerate() {
        let t = line.trim();
        let lower = t.to_ascii_lowercase();
        if lower.starts_with("<top>") {
            cur = Some(Pending {
                start: i + 1,
                ..Default::default()
            });
            continue;
        }
        let Some(p) = cur.as_mut() else {
            if !t.is_empty() {
                return Err(CorpusError::malformed(path, i + 1, "content outside <top>"));
            }
            continue;
        };
        if lower.starts_with("</top>") {
            let p = cur.take().unwrap();
            let qid = p
                .qid
                .ok_or_else(|| CorpusError::malformed(path, p.start, "topic without <num>"))?;
            out.push(Topic::new(qid, p.title.unwrap_or_default()));
            continue;
        }
        if lower.starts_with('<') && !lower.starts_with("</title>") {
            p.in_title = false;
        }
        if lower.starts_with("<num>") {
            let rest = strip_closing(&t[5..], "</num>");
            let rest = rest.trim();
            let rest = rest
                .strip_prefix("Number:")
                .or_else(|| rest.strip_prefix("number:"))
                .unwrap_or(rest);
            p.qid = Some(rest.trim().to_string());
        } else if lower.starts_with("<title>") {
            let rest = &t[7..];
            let closed = rest.to_ascii_lowercase().contains("</title>");
            let rest = strip_closing(rest, "</title>");
            let rest = rest.trim();
            let rest = rest
                .strip_prefix("Topic:")
                .or_else(|| rest.strip_prefix("topic:"))
                .unwrap_or(rest);
            p.title = Some(rest.trim().to_string());
            p.in_title = !closed;
        } else if p.in_title {
            let piece = strip_closing(t, "</title>");
            if t.to_ascii_lowercase().contains("</title>") {
                p.in_title = false;
            }
            let title = p.title.get_or_insert_with(String::new);
            if !piece.trim().is_empty() {
                if !title.is_empty() {
                    title.push(' ');
                }
                title.push_str(piece.trim());
            }
        }
    }
    if let Some(p) = cur {
        return Err(CorpusError::malformed(path, p.start, "unterminated <top>"));
    }
    Ok(out)
}

fn strip_closing<'a>(s: &'a str, close: &str) -> &'a str {
    match s.to_ascii_lowercase().find(close) {
        Some(i) => &s[..i],
        None => s,
    }
}

/// Graded relevance judgments. Unlisted pairs have grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one judgment. Negative grades are stored as 0.
    pub fn insert(&mut self, qid: &str, docno: &str, grade: i64) -> Result<()> {
        let grade = grade.max(0) as u32;
        let entry = self.grades.entry(qid.to_string()).or_default();
        if entry.insert(docno.to_string(), grade).is_some() {
            return Err(CorpusError::DuplicateJudgment {
                qid: qid.to_string(),
                docno: docno.to_string(),
            });
        }
        Ok(())
    }

    pub fn grade(&self, qid: &str, docno: &str) -> u32 {
        self.grades
            .get(qid)
            .and_then(|m| m.get(docno))
            .copied()
            .unwrap_or(0)
    }

    /// All judgments for one query, keyed by docno.
    pub fn judgments(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.grades.get(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    /// Total number of judgments.
    pub fn len(&self) -> usize {
        self.grades.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads a `qid iter docno grade` qrels file; the iter column is ignored.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut qrels = Qrels::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 4 {
            return Err(CorpusError::malformed(
                path,
                i + 1,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade: i64 = cols[3].parse().map_err(|_| {
            CorpusError::malformed(
                path,
                i + 1,
                format!("grade `{}` is not an integer", cols[3]),
            )
        })?;
        qrels.insert(cols[0], cols[2], grade)?;
    }
    Ok(qrels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub docno: String,
    pub rank: usize,
    pub score: f64,
}

/// Ranked results for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunList {
    pub qid: String,
    pub tag: String,
    pub entries: Vec<RunEntry>,
}

impl RunList {
    pub fn new(qid: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            tag: tag.into(),
            entries: Vec::new(),
        }
    }

    /// Builds a run from unordered `(docno, score)` pairs: sorts by score
    /// descending with docno ascending on ties and assigns ranks 1..n.
    pub fn from_scored(
        qid: impl Into<String>,
        tag: impl Into<String>,
        mut scored: Vec<(String, f64)>,
    ) -> Self {
        sort_scored(&mut scored);
        Self {
            qid: qid.into(),
            tag: tag.into(),
            entries: scored
                .into_iter()
                .enumerate()
                .map(|(i, (docno, score))| RunEntry {
                    docno,
                    rank: i + 1,
                    score,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn docnos(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.docno.as_str())
    }

    /// Checks contiguous ranks, non-increasing scores and unique docnos.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| CorpusError::InvalidRun {
            qid: self.qid.clone(),
            message,
        };
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(bad(format!("rank {} at position {}", e.rank, i + 1)));
            }
            if !e.score.is_finite() {
                return Err(bad(format!("non-finite score for `{}`", e.docno)));
            }
            if i > 0 && e.score > self.entries[i - 1].score {
                return Err(bad(format!("score increases at rank {}", e.rank)));
            }
            if !seen.insert(e.docno.as_str()) {
                return Err(bad(format!("docno `{}` repeated", e.docno)));
            }
        }
        Ok(())
    }
}

pub(crate) fn sort_scored(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Writes runs in TREC format to any writer.
pub fn write_run_to<W: Write>(runs: &[RunList], mut out: W) -> io::Result<()> {
    for run in runs {
        for e in &run.entries {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                run.qid, e.docno, e.rank, e.score, run.tag
            )?;
        }
    }
    out.flush()
}

pub fn write_run(runs: &[RunList], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for run in runs {
        run.validate()?;
    }
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_run_to(runs, BufWriter::new(file)).map_err(|e| CorpusError::io(path, e))
}

/// Reads a TREC run file. Entries of each query are re-sorted by score
/// (docno ascending on ties) and re-ranked, so unsorted input is accepted.
/// Queries keep their order of first appearance.
pub fn read_run(path: impl AsRef<Path>) -> Result<Vec<RunList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    // qid -> (tag, scored entries, docnos seen)
    type Pending = (String, Vec<(String, f64)>, HashSet<String>);
    let mut by_qid: HashMap<String, Pending> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(CorpusError::malformed(
                path,
                i + 1,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        cols[3].parse::<usize>().map_err(|_| {
            CorpusError::malformed(path, i + 1, format!("rank `{}` is not an integer", cols[3]))
        })?;
        let score: f64 = cols[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| {
                CorpusError::malformed(path, i + 1, format!("bad score `{}`", cols[4]))
            })?;
        let qid = cols[0];
        let slot = by_qid.entry(qid.to_string()).or_insert_with(|| {
            order.push(qid.to_string());
            (cols[5].to_string(), Vec::new(), HashSet::new())
        });
        if !slot.2.insert(cols[2].to_string()) {
            return Err(CorpusError::malformed(
                path,
                i + 1,
                format!("docno `{}` repeated for qid `{qid}`", cols[2]),
            ));
        }
        slot.1.push((cols[2].to_string(), score));
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let (tag, scored, _) = by_qid.remove(&qid).unwrap();
            RunList::from_scored(qid, tag, scored)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_document() {
        let f = fixture("{\"docno\":\"d1\",\"text\":\"goldfish grow\"}\n");
        let docs: Vec<_> = load_corpus(f.path(), CorpusFormat::Jsonl)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs, vec![Document::new("d1", "goldfish grow")]);
    }

    #[test]
    fn empty_corpus_file() {
        let f = fixture("");
        assert_eq!(
            load_corpus(f.path(), CorpusFormat::Jsonl).unwrap().count(),
            0
        );
    }

    #[test]
    fn tsv_rows_match_line_count() {
        let mut content = String::new();
        for i in 0..37 {
            content.push_str(&format!("doc{i}\tsome text number {i}\n"));
            if i % 5 == 0 {
                content.push('\n');
            }
        }
        let f = fixture(&content);
        let expected = content.lines().filter(|l| !l.trim().is_empty()).count();
        let docs: Vec<_> = load_corpus(f.path(), CorpusFormat::Tsv)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs.len(), expected);
        assert_eq!(docs[3].docno, "doc3");
    }

    #[test]
    fn malformed_jsonl_reports_line() {
        let f = fixture("{\"docno\":\"d1\",\"text\":\"x\"}\n\n{not json\n");
        let err = load_corpus(f.path(), CorpusFormat::Jsonl)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(
            matches!(err, CorpusError::Malformed { line: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn duplicate_docno_is_named() {
        let f = fixture("d1\ta\nd2\tb\nd1\tc\n");
        let err = load_corpus(f.path(), CorpusFormat::Tsv)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDocno(ref d) if d == "d1"));
    }

    #[test]
    fn trec_text_documents() {
        let f = fixture(
            "<DOC>\n<DOCNO> FT1 </DOCNO>\n<HEADLINE>Fish news</HEADLINE>\n<TEXT>\ngoldfish\ngrow big\n</TEXT>\n</DOC>\n\
             <DOC>\n<DOCNO>FT2</DOCNO>\n<TEXT>carp</TEXT>\n</DOC>\n",
        );
        let docs: Vec<_> = load_corpus(f.path(), CorpusFormat::TrecText)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].docno, "FT1");
        assert_eq!(docs[0].text, "goldfish grow big");
        assert_eq!(docs[0].title.as_deref(), Some("Fish news"));
        assert_eq!(docs[0].full_text(), "Fish news goldfish grow big");
        assert_eq!(docs[1].text, "carp");
    }

    #[test]
    fn tsv_topic() {
        let f = fixture("156493\tdo goldfish grow\n");
        let topics = load_topics(f.path(), TopicFormat::Tsv).unwrap();
        assert_eq!(topics, vec![Topic::new("156493", "do goldfish grow")]);
    }

    #[test]
    fn trec_topic_titles() {
        let f = fixture(
            "<top>\n<num> Number: 301\n<title> International Organized Crime\n\n<desc> Description:\nIdentify organizations.\n</top>\n\n\
             <top>\n<num> Number: 302 </num>\n<title>Poliomyelitis and Post-Polio</title>\n<desc>Is the disease under control?\n</top>\n",
        );
        let topics = load_topics(f.path(), TopicFormat::TrecTopic).unwrap();
        assert_eq!(
            topics,
            vec![
                Topic::new("301", "International Organized Crime"),
                Topic::new("302", "Poliomyelitis and Post-Polio"),
            ]
        );
    }

    #[test]
    fn topic_errors() {
        let dup = fixture("1\ta\n1\tb\n");
        assert!(matches!(
            load_topics(dup.path(), TopicFormat::Tsv),
            Err(CorpusError::DuplicateQid(q)) if q == "1"
        ));
        let empty = fixture("1\ta\n2\t   \n");
        assert!(matches!(
            load_topics(empty.path(), TopicFormat::Tsv),
            Err(CorpusError::EmptyQuery(q)) if q == "2"
        ));
    }

    #[test]
    fn qrels_basic() {
        let f = fixture("1 0 d7 2\n1 0 d8 0\n");
        let q = load_qrels(f.path()).unwrap();
        assert_eq!(q.grade("1", "d7"), 2);
        assert_eq!(q.grade("1", "d8"), 0);
        assert_eq!(q.grade("1", "nope"), 0);
        assert_eq!(q.grade("9", "d7"), 0);
    }

    #[test]
    fn qrels_errors() {
        let dup = fixture("1 0 d7 2\n1 0 d7 1\n");
        assert!(matches!(
            load_qrels(dup.path()),
            Err(CorpusError::DuplicateJudgment { .. })
        ));
        let bad = fixture("1 0 d7 2\n1 0 d8 x\n");
        assert!(matches!(
            load_qrels(bad.path()),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn qrels_line_count() {
        let content: String = (0..100)
            .map(|i| format!("{} 0 d{} {}\n", i % 7, i, i % 4))
            .collect();
        let f = fixture(&content);
        assert_eq!(load_qrels(f.path()).unwrap().len(), content.lines().count());
    }

    #[test]
    fn run_line_format() {
        let mut run = RunList::new("1", "bm25");
        run.entries.push(RunEntry {
            docno: "d5".into(),
            rank: 1,
            score: 2.5,
        });
        let mut buf = Vec::new();
        write_run_to(&[run], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 Q0 d5 1 2.500000 bm25\n");
    }

    #[test]
    fn empty_run_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.run");
        write_run(&[], &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);
    }

    #[test]
    fn read_run_resorts_and_groups() {
        let f = fixture("q1 Q0 a 3 1.0 t\nq2 Q0 x 1 9.0 t\nq1 Q0 b 1 3.0 t\nq1 Q0 c 2 1.0 t\n");
        let runs = read_run(f.path()).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].qid, "q1");
        assert_eq!(runs[0].docnos().collect::<Vec<_>>(), vec!["b", "a", "c"]);
        assert_eq!(runs[0].entries[2].rank, 3);
        assert_eq!(runs[1].entries.len(), 1);
    }

    #[test]
    fn read_run_rejects_bad_columns() {
        let f = fixture("q1 Q0 a 1 1.0 t\nq1 Q0 b 2 1.0\n");
        assert!(matches!(
            read_run(f.path()),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn validate_catches_broken_runs() {
        let mut run = RunList::from_scored("q", "t", vec![("a".into(), 1.0), ("b".into(), 2.0)]);
        assert!(run.validate().is_ok());
        run.entries.swap(0, 1);
        assert!(run.validate().is_err());
    }
}
