use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{prompt_digest, Backend, GenRequest, LlmError, Result};

/// One line of a replay transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_digest: String,
    pub prompt: String,
    pub response: String,
    /// Free-form provenance note; ignored by the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl TranscriptRecord {
    pub fn new(prompt: impl Into<String>, response: impl Into<String>) -> Self {
        let prompt = prompt.into();
        Self {
            prompt_digest: prompt_digest(&prompt),
            prompt,
            response: response.into(),
            source: None,
        }
    }
}

/// Serves recorded responses keyed by prompt digest.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
    identity: String,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Result<Self> {
        let mut responses = BTreeMap::new();
        for r in records {
            if !r.prompt.is_empty() && prompt_digest(&r.prompt) != r.prompt_digest {
                return Err(LlmError::InvalidRequest(format!(
                    "transcript digest {} does not match its prompt",
                    r.prompt_digest
                )));
            }
            if let Some(prev) = responses.insert(r.prompt_digest.clone(), r.response.clone()) {
                if prev != r.response {
                    return Err(LlmError::InvalidRequest(format!(
                        "conflicting responses recorded for prompt {}",
                        r.prompt_digest
                    )));
                }
            }
        }
        let mut h = Sha256::new();
        for (k, v) in &responses {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        let identity = format!("replay:{}", hex::encode(&h.finalize()[..8]));
        Ok(Self {
            responses: responses.into_iter().collect(),
            identity,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| LlmError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| LlmError::Fixture {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })?);
        }
        Self::from_records(records).map_err(|e| LlmError::Fixture {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn model(&self) -> &str {
        "replay"
    }

    fn generate(&self, request: &GenRequest) -> Result<String> {
        let digest = prompt_digest(&request.prompt);
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(LlmError::ReplayMiss { digest })
    }
}

/// Pass-through backend that records every prompt/response pair so a run
/// can later be replayed exactly.
pub struct TranscriptRecorder {
    inner: Arc<dyn Backend>,
    records: Mutex<BTreeMap<String, TranscriptRecord>>,
}

impl TranscriptRecorder {
    pub fn new(inner: Arc<dyn Backend>) -> Self {
        Self {
            inner,
            records: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.records.lock().unwrap().values().cloned().collect()
    }

    /// Writes records as JSONL ordered by prompt digest.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_transcript(&self.records(), path)
    }
}

/// Writes `records` as JSONL, sorted by prompt digest with duplicates removed.
pub fn write_transcript(records: &[TranscriptRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| LlmError::Io {
        path: path.to_path_buf(),
        source,
    };
    let unique: BTreeMap<&str, &TranscriptRecord> = records
        .iter()
        .map(|r| (r.prompt_digest.as_str(), r))
        .collect();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in unique.values() {
        writeln!(
            out,
            "{}",
            serde_json::to_string(r).expect("record serializes")
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

impl Backend for TranscriptRecorder {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn model(&self) -> &str {
        self.inner.model()
    }

    fn generate(&self, request: &GenRequest) -> Result<String> {
        let text = self.inner.generate(request)?;
        let rec = TranscriptRecord::new(request.prompt.clone(), text.clone());
        self.records
            .lock()
            .unwrap()
            .insert(rec.prompt_digest.clone(), rec);
        Ok(text)
    }
}
