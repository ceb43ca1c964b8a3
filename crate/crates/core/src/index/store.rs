//! On-disk index layout.
//!
//! A directory holding one file, `index.gqx`:
//!
//! ```text
//! magic "GENQRIDX" | version u32 LE | body | sha256(magic..body)
//! body = fingerprint | analyzer json | ndocs | (docno, len)* | nterms | (term, npost, (doc delta, tf)*)*
//! ```
//!
//! Integers in the body are LEB128 varints; strings are length-prefixed.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Analyzer, IndexError, Posting, PostingsIndex, Result};

pub const INDEX_FILE: &str = "index.gqx";
pub const INDEX_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GENQRIDX";

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_varint(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn varint(&mut self) -> Option<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = *self.buf.get(self.pos)?;
            self.pos += 1;
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Some(v);
            }
        }
        None
    }

    fn u32(&mut self) -> Option<u32> {
        self.varint().and_then(|v| u32::try_from(v).ok())
    }

    fn string(&mut self) -> Option<String> {
        let len = usize::try_from(self.varint()?).ok()?;
        let end = self.pos.checked_add(len)?;
        let s = std::str::from_utf8(self.buf.get(self.pos..end)?).ok()?;
        self.pos = end;
        Some(s.to_string())
    }
}

fn encode(index: &PostingsIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    put_str(&mut out, &index.analyzer().fingerprint());
    put_str(
        &mut out,
        &serde_json::to_string(index.analyzer()).expect("analyzer serializes"),
    );
    put_varint(&mut out, index.num_docs() as u64);
    for (docno, len) in index.raw_docnos().iter().zip(index.raw_doc_lens()) {
        put_str(&mut out, docno);
        put_varint(&mut out, u64::from(*len));
    }
    put_varint(&mut out, index.num_terms() as u64);
    for (term, postings) in index.raw_terms().iter().zip(index.raw_postings()) {
        put_str(&mut out, term);
        put_varint(&mut out, postings.len() as u64);
        let mut prev = 0u32;
        for p in postings {
            put_varint(&mut out, u64::from(p.doc - prev));
            put_varint(&mut out, u64::from(p.tf));
            prev = p.doc;
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Writes the index into directory `dir` (created if missing). The file is
/// written to a temporary name and renamed into place.
pub fn save_index(index: &PostingsIndex, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let io = |source| IndexError::Io {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    std::io::Write::write_all(&mut tmp, &encode(index)).map_err(io)?;
    tmp.persist(dir.join(INDEX_FILE)).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_index(dir: impl AsRef<Path>) -> Result<PostingsIndex> {
    let path = dir.as_ref().join(INDEX_FILE);
    let bytes = fs::read(&path).map_err(|source| IndexError::Io {
        path: path.clone(),
        source,
    })?;
    let corrupt = |message: &str| IndexError::Corrupt {
        path: path.clone(),
        message: message.to_string(),
    };
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != INDEX_VERSION {
        return Err(IndexError::VersionMismatch {
            path,
            found: version,
            expected: INDEX_VERSION,
        });
    }
    let (content, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(content).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let mut c = Cursor {
        buf: content,
        pos: 12,
    };
    let fingerprint = c.string().ok_or_else(|| corrupt("truncated fingerprint"))?;
    let analyzer: Analyzer = c
        .string()
        .and_then(|s| serde_json::from_str(&s).ok())
        .ok_or_else(|| corrupt("bad analyzer config"))?;
    if analyzer.fingerprint() != fingerprint {
        return Err(IndexError::FingerprintMismatch {
            path,
            expected: analyzer.fingerprint(),
            found: fingerprint,
        });
    }
    let n_docs = c.varint().ok_or_else(|| corrupt("truncated header"))? as usize;
    let mut docnos = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_lens = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        docnos.push(c.string().ok_or_else(|| corrupt("truncated docno table"))?);
        doc_lens.push(c.u32().ok_or_else(|| corrupt("truncated docno table"))?);
    }
    let n_terms = c.varint().ok_or_else(|| corrupt("truncated header"))? as usize;
    let mut terms = Vec::with_capacity(n_terms.min(1 << 20));
    let mut postings = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        terms.push(c.string().ok_or_else(|| corrupt("truncated term table"))?);
        let n = c.varint().ok_or_else(|| corrupt("truncated postings"))? as usize;
        let mut list = Vec::with_capacity(n.min(n_docs));
        let mut doc = 0u32;
        for _ in 0..n {
            let delta = c.u32().ok_or_else(|| corrupt("truncated postings"))?;
            let tf = c.u32().ok_or_else(|| corrupt("truncated postings"))?;
            doc = doc
                .checked_add(delta)
                .ok_or_else(|| corrupt("posting overflow"))?;
            if doc as usize >= n_docs {
                return Err(corrupt("posting references unknown document"));
            }
            list.push(Posting { doc, tf });
        }
        postings.push(list);
    }
    if c.pos != content.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(PostingsIndex::from_parts(
        analyzer, terms, postings, docnos, doc_lens,
    ))
}

/// Loads an index and checks it was built with `expected`.
pub fn load_index_checked(dir: impl AsRef<Path>, expected: &Analyzer) -> Result<PostingsIndex> {
    let index = load_index(&dir)?;
    if index.analyzer().fingerprint() != expected.fingerprint() {
        return Err(IndexError::FingerprintMismatch {
            path: dir.as_ref().join(INDEX_FILE),
            expected: expected.fingerprint(),
            found: index.analyzer().fingerprint(),
        });
    }
    Ok(index)
}
