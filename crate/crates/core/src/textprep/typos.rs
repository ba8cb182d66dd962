use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::TokenList;

/// True when `a` and `b` differ by exactly one insertion, deletion or substitution.
pub fn within_one_edit(a: &str, b: &str) -> bool {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    match long.len() - short.len() {
        0 => short.iter().zip(long.iter()).filter(|(x, y)| x != y).count() == 1,
        1 => {
            let prefix = short.iter().zip(long.iter()).take_while(|(x, y)| x == y).count();
            short[prefix..] == long[prefix + 1..]
        }
        _ => false,
    }
}

/// Corpus-level map from rare tokens to their frequent distance-one neighbour.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypoFolder {
    pub corrections: BTreeMap<String, String>,
}

impl TypoFolder {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [String]>, min_freq: u64) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for t in doc {
                *freq.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut frequent_by_len: HashMap<usize, Vec<(&str, u64)>> = HashMap::new();
        for (&t, &f) in &freq {
            if f >= min_freq {
                frequent_by_len.entry(t.chars().count()).or_default().push((t, f));
            }
        }
        let mut corrections = BTreeMap::new();
        for (&t, &f) in &freq {
            if f >= min_freq {
                continue;
            }
            let len = t.chars().count();
            let best = [len.wrapping_sub(1), len, len + 1]
                .iter()
                .filter_map(|l| frequent_by_len.get(l))
                .flatten()
                .filter(|(cand, _)| within_one_edit(t, cand))
                // highest frequency, then lexicographically smallest
                .min_by(|(ca, fa), (cb, fb)| fb.cmp(fa).then_with(|| ca.cmp(cb)));
            if let Some((target, _)) = best {
                corrections.insert(t.to_string(), target.to_string());
            }
        }
        TypoFolder { corrections }
    }

    pub fn correct<'a>(&'a self, token: &'a str) -> &'a str {
        self.corrections.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn apply(&self, doc: &TokenList) -> TokenList {
        TokenList {
            source_id: doc.source_id.clone(),
            tokens: doc.tokens.iter().map(|t| self.correct(t).to_string()).collect(),
        }
    }
}

/// Replace every rare token that has a frequent distance-one neighbour.
pub fn fold_typos(docs: &[TokenList], typo_min_freq: u64) -> Vec<TokenList> {
    let folder = TypoFolder::fit(docs.iter().map(|d| d.tokens.as_slice()), typo_min_freq);
    docs.iter().map(|d| folder.apply(d)).collect()
}
