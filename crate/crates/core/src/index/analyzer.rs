use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    #[default]
    None,
    Porter,
}

/// Text analysis chain shared by indexing, query construction and feedback.
///
/// With `strip_punctuation` set, tokens are maximal runs of alphanumeric
/// characters; otherwise text is split on Unicode whitespace only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analyzer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub stopwords: BTreeSet<String>,
    pub stemmer: Stemmer,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            stopwords: BTreeSet::new(),
            stemmer: Stemmer::None,
        }
    }
}

impl Analyzer {
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        let raw: Box<dyn Iterator<Item = &str>> = if self.strip_punctuation {
            Box::new(
                text.split(|c: char| !c.is_alphanumeric())
                    .filter(|t| !t.is_empty()),
            )
        } else {
            Box::new(text.split_whitespace())
        };
        raw.filter_map(|tok| {
            let tok = if self.lowercase {
                tok.to_lowercase()
            } else {
                tok.to_string()
            };
            if self.stopwords.contains(&tok) {
                return None;
            }
            Some(match self.stemmer {
                Stemmer::None => tok,
                Stemmer::Porter => porter_stemmer::stem(&tok),
            })
        })
        .collect()
    }

    /// Stable digest of the configuration, embedded in persisted indexes.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("analyzer serializes");
        let mut h = Sha256::new();
        h.update(b"genqr-analyzer-v1\0");
        h.update(&canonical);
        hex::encode(&h.finalize()[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_strips() {
        let a = Analyzer::default();
        assert_eq!(
            a.analyze("Do Goldfish GROW?"),
            vec!["do", "goldfish", "grow"]
        );
        assert!(a.analyze("").is_empty());
        assert!(a.analyze("  ?! ").is_empty());
    }

    #[test]
    fn stopwords_apply_after_splitting() {
        let a = Analyzer::default().with_stopwords(["a"]);
        assert_eq!(a.analyze("it's a test"), vec!["it", "s", "test"]);
    }

    #[test]
    fn whitespace_only_split_keeps_punctuation() {
        let a = Analyzer {
            strip_punctuation: false,
            lowercase: false,
            ..Analyzer::default()
        };
        assert_eq!(
            a.analyze("Hello, world!\tok"),
            vec!["Hello,", "world!", "ok"]
        );
    }

    #[test]
    fn porter_stemming() {
        let a = Analyzer {
            stemmer: Stemmer::Porter,
            ..Analyzer::default()
        };
        assert_eq!(
            a.analyze("Caresses ponies running"),
            vec!["caress", "poni", "run"]
        );
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = Analyzer::default();
        let b = Analyzer::default().with_stopwords(["the"]);
        assert_eq!(a.fingerprint(), Analyzer::default().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
