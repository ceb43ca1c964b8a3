use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, GenRequest, LlmError, Result, SamplingConfig};

#[derive(Serialize)]
struct KeyMaterial<'a> {
    v: u32,
    backend: String,
    model: &'a str,
    prompt: &'a str,
    sampling: &'a SamplingConfig,
    max_new_tokens: u32,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    text: String,
}

/// Content-addressed response store: one JSON file per key under
/// `<dir>/<key[..2]>/<key>.json`, written atomically via rename.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
    warnings: Mutex<Vec<String>>,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| LlmError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Self {
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            warnings: Mutex::new(Vec::new()),
        })
    }

    pub fn key(backend: &dyn Backend, request: &GenRequest) -> String {
        let material = KeyMaterial {
            v: 1,
            backend: backend.identity(),
            model: backend.model(),
            prompt: &request.prompt,
            sampling: &request.sampling,
            max_new_tokens: request.max_new_tokens,
            seed: request.seed,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    /// Stored text for `key`. Unreadable or mismatching entries count as a
    /// miss and leave a warning.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = self.path_for(key);
        let found = match fs::read(&path) {
            Ok(bytes) => match serde_json::from_slice::<Entry>(&bytes) {
                Ok(e) if e.key == key => Some(e.text),
                Ok(_) => {
                    self.warn(format!("{}: cache entry key mismatch", path.display()));
                    None
                }
                Err(err) => {
                    self.warn(format!("{}: corrupt cache entry ({err})", path.display()));
                    None
                }
            },
            Err(_) => None,
        };
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        let path = self.path_for(key);
        let parent = path.parent().expect("shard dir").to_path_buf();
        let io = |source| LlmError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&parent).map_err(io)?;
        let body = serde_json::to_vec(&Entry {
            key: key.to_string(),
            text: text.to_string(),
        })
        .expect("entry serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(io)?;
        tmp.write_all(&body).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap().clone()
    }

    fn warn(&self, message: String) {
        log::warn!("{message}");
        self.warnings.lock().unwrap().push(message);
    }
}

/// Cache lookup falling back to `backend` and storing the result.
pub fn cached_generate(
    cache: &ResponseCache,
    backend: &dyn Backend,
    request: &GenRequest,
) -> Result<String> {
    let key = ResponseCache::key(backend, request);
    if let Some(text) = cache.get(&key) {
        return Ok(text);
    }
    let text = backend.generate(request)?;
    cache.put(&key, &text)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::AtomicUsize;

    #[derive(Default)]
    struct Counting {
        calls: AtomicUsize,
        reply: String,
    }

    impl Backend for Counting {
        fn identity(&self) -> String {
            "counting".into()
        }

        fn model(&self) -> &str {
            "m"
        }

        fn generate(&self, _: &GenRequest) -> Result<String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.reply.clone())
        }
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let b = Counting {
            reply: "age goldfish".into(),
            ..Default::default()
        };
        let req = GenRequest::new("prompt");
        assert_eq!(cached_generate(&cache, &b, &req).unwrap(), "age goldfish");
        assert_eq!(cached_generate(&cache, &b, &req).unwrap(), "age goldfish");
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
        assert_eq!(cache.hits(), 1);
    }

    #[test]
    fn sampling_change_changes_key() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let b = Counting::default();
        let req = GenRequest::new("prompt");
        let mut other = req.clone();
        other.sampling.top_p = 0.5;
        assert_ne!(ResponseCache::key(&b, &req), ResponseCache::key(&b, &other));
        cached_generate(&cache, &b, &req).unwrap();
        cached_generate(&cache, &b, &other).unwrap();
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn corrupt_entry_is_a_miss_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let b = Counting {
            reply: "fresh".into(),
            ..Default::default()
        };
        let req = GenRequest::new("p");
        let key = ResponseCache::key(&b, &req);
        cache.put(&key, "old").unwrap();
        fs::write(cache.path_for(&key), b"{broken").unwrap();
        assert_eq!(cached_generate(&cache, &b, &req).unwrap(), "fresh");
        assert_eq!(cache.warnings().len(), 1);
        // The rewritten entry is valid again.
        assert_eq!(cache.get(&key).as_deref(), Some("fresh"));
    }

    #[test]
    fn foreign_entry_is_never_returned() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = "ab".repeat(32);
        let other = format!("{}cd", "ab".repeat(31));
        cache.put(&other, "x").unwrap();
        fs::copy(cache.path_for(&other), cache.path_for(&key)).unwrap();
        assert_eq!(cache.get(&key), None);
        assert_eq!(cache.warnings().len(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_preserves_text(text in "(?s).{0,200}", key in "[0-9a-f]{64}") {
            let dir = tempfile::tempdir().unwrap();
            let cache = ResponseCache::open(dir.path()).unwrap();
            cache.put(&key, &text).unwrap();
            prop_assert_eq!(cache.get(&key), Some(text));
        }
    }
}
