//! Text normalization: lowercase, strip punctuation, drop stop words, stem, cap length.

mod stem;
mod typos;
mod vocab;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stem::stem;
pub use typos::{fold_typos, within_one_edit, TypoFolder};
pub use vocab::{build_vocabulary, Vocabulary, VocabularyEntry};

/// Default sentence cap in tokens.
pub const DEFAULT_MAX_TOKENS: usize = 20;
/// Default corpus frequency below which a token is a typo candidate.
pub const DEFAULT_TYPO_MIN_FREQ: u64 = 5;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("no token reaches min_count {min_count} (highest frequency {max_frequency})")]
    EmptyVocabulary { min_count: u64, max_frequency: u64 },
    #[error("cannot read stop-word list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Normalized tokens of one document.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenList {
    pub source_id: String,
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenList { source_id: source_id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Normalization settings shared by every text consumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPipeline {
    pub stopwords: BTreeSet<String>,
    pub max_tokens: usize,
    pub typo_min_freq: u64,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            max_tokens: DEFAULT_MAX_TOKENS,
            typo_min_freq: DEFAULT_TYPO_MIN_FREQ,
        }
    }
}

/// One token per line; blank lines and `#` comments ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl TextPipeline {
    pub fn with_stopwords(mut self, stopwords: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.stopwords = stopwords.into_iter().map(|s| s.into().to_lowercase()).collect();
        self
    }

    pub fn load_stopwords(mut self, path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TextError::Io { path: path.display().to_string(), source })?;
        self.stopwords = parse_stopwords(&text);
        Ok(self)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Normalize raw text into at most `max_tokens` stems, preserving order.
    ///
    /// Stop words are checked both before and after stemming so that feeding the
    /// joined output back in yields the same tokens.
    pub fn normalize(&self, text: &str) -> TokenList {
        let lowered = text.to_lowercase();
        let tokens = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .filter(|t| !t.chars().all(|c| c.is_numeric()))
            .filter(|t| !self.is_stopword(t))
            .map(stem)
            .filter(|t| !self.is_stopword(t))
            .take(self.max_tokens)
            .collect();
        TokenList { source_id: String::new(), tokens }
    }

    pub fn normalize_doc(&self, source_id: &str, text: &str) -> TokenList {
        TokenList { source_id: source_id.to_string(), ..self.normalize(text) }
    }
}

/// Free-function form of [`TextPipeline::normalize`].
pub fn normalize(text: &str, pipeline: &TextPipeline) -> TokenList {
    pipeline.normalize(text)
}
