use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::TextError;

/// Dense token index ordered by descending corpus frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    min_count: u64,
    tokens: Vec<String>,
    frequencies: Vec<u64>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.tokens, r.frequencies, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { min_count: v.min_count, tokens: v.tokens, frequencies: v.frequencies }
    }
}

/// One line of the vocabulary export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyEntry {
    pub token: String,
    pub index: usize,
    pub frequency: u64,
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, frequencies: Vec<u64>, min_count: u64) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, frequencies, index, min_count }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frequency(&self, index: usize) -> u64 {
        self.frequencies[index]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Keep only the `n` most frequent entries.
    pub fn truncated(&self, n: usize) -> Vocabulary {
        let n = n.min(self.len());
        Vocabulary::from_parts(self.tokens[..n].to_vec(), self.frequencies[..n].to_vec(), self.min_count)
    }

    pub fn entries(&self) -> impl Iterator<Item = VocabularyEntry> + '_ {
        self.tokens
            .iter()
            .zip(&self.frequencies)
            .enumerate()
            .map(|(index, (token, &frequency))| VocabularyEntry { token: token.clone(), index, frequency })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in self.entries() {
            serde_json::to_writer(&mut w, &e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn build_vocabulary<'a, I>(docs: I, min_count: u64) -> Result<Vocabulary, TextError>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for t in doc {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    if freq.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let max_frequency = freq.values().copied().max().unwrap_or(0);
    let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, f)| f >= min_count).collect();
    if kept.is_empty() {
        return Err(TextError::EmptyVocabulary { min_count, max_frequency });
    }
    kept.sort_by(|(ta, fa), (tb, fb)| fb.cmp(fa).then_with(|| ta.cmp(tb)));
    let (tokens, frequencies) = kept.into_iter().map(|(t, f)| (t.to_string(), f)).unzip();
    Ok(Vocabulary::from_parts(tokens, frequencies, min_count))
}
