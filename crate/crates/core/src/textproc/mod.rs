//! Text analysis: tokenization, stopword removal, Porter stemming, and
//! corpus/topic file parsing.

mod corpus;
mod porter;
mod topics;

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use corpus::{parse_trec_corpus, parse_tsv_corpus, read_corpus, write_tsv_corpus, CorpusFormat, ParsedDoc};
pub use porter::stem;
pub use topics::{parse_topics, Topic};

use crate::{Error, Result};

const SMART_STOPWORDS: &str = include_str!("../../data/smart_stopwords.txt");

/// Analysis pipeline settings. Stopword entries are stored lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    pub stopwords: BTreeSet<String>,
    pub stemming: bool,
    pub lowercase: bool,
}

impl Default for AnalyzerConfig {
    /// SMART stopwords, Porter stemming, lowercasing.
    fn default() -> Self {
        Self {
            stopwords: smart_stopwords(),
            stemming: true,
            lowercase: true,
        }
    }
}

impl AnalyzerConfig {
    pub fn new(stopwords: impl IntoIterator<Item = impl AsRef<str>>, stemming: bool) -> Self {
        Self {
            stopwords: stopwords
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
            stemming,
            lowercase: true,
        }
    }

    /// Loads a stopword file: one word per line, `#` comments and blank
    /// lines ignored.
    pub fn with_stopword_file(path: &Path, stemming: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(Self::new(read_stopwords(std::io::BufReader::new(file))?, stemming))
    }

    /// Hex SHA-256 over a canonical rendering of the config. Stored in the
    /// index manifest and compared at query time.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("lowercase={};stemming={};stopwords=", self.lowercase, self.stemming));
        for w in &self.stopwords {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

pub fn smart_stopwords() -> BTreeSet<String> {
    read_stopwords(SMART_STOPWORDS.as_bytes())
        .expect("bundled stopword list parses")
        .into_iter()
        .collect()
}

pub fn read_stopwords<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim();
        if w.is_empty() || w.starts_with('#') {
            continue;
        }
        out.push(w.to_lowercase());
    }
    Ok(out)
}

/// Lowercased tokens split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, true)
}

fn tokenize_with(text: &str, lowercase: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// tokenize -> drop stopwords -> stem. Order and duplicates are preserved.
/// A stem that itself lands in the stopword set is dropped as well.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    tokenize_with(text, config.lowercase)
        .into_iter()
        .filter(|t| !config.stopwords.contains(t))
        .map(|t| if config.stemming { stem(&t) } else { t })
        .filter(|t| !t.is_empty() && !config.stopwords.contains(t))
        .collect()
}

pub(crate) fn invalid_utf8(line: usize) -> Error {
    Error::format(line, "invalid UTF-8")
}
