use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::error::{Error, Result};

const DEMO_LEXICON: &str = include_str!("demo_lexicon.json");

/// Word-category lexicon in the style of psycholinguistic word counts.
///
/// Entries ending in `*` match any token with that prefix. Categories are
/// ordered by name, which fixes the layout of the feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    from = "BTreeMap<String, Vec<String>>",
    into = "BTreeMap<String, Vec<String>>"
)]
pub struct CategoryLexicon {
    categories: Vec<String>,
    entries: Vec<Vec<String>>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, usize)>,
}

impl From<BTreeMap<String, Vec<String>>> for CategoryLexicon {
    fn from(map: BTreeMap<String, Vec<String>>) -> Self {
        let mut lex = CategoryLexicon {
            categories: Vec::new(),
            entries: Vec::new(),
            exact: HashMap::new(),
            prefixes: Vec::new(),
        };
        for (c, (name, words)) in map.into_iter().enumerate() {
            for w in &words {
                let w = w.trim().to_lowercase();
                if let Some(prefix) = w.strip_suffix('*') {
                    lex.prefixes.push((prefix.to_string(), c));
                } else if !w.is_empty() {
                    let cats = lex.exact.entry(w).or_default();
                    if !cats.contains(&c) {
                        cats.push(c);
                    }
                }
            }
            lex.categories.push(name);
            lex.entries.push(words);
        }
        lex
    }
}

impl From<CategoryLexicon> for BTreeMap<String, Vec<String>> {
    fn from(lex: CategoryLexicon) -> Self {
        lex.categories.into_iter().zip(lex.entries).collect()
    }
}

impl CategoryLexicon {
    /// Built-in six-category lexicon for demos and tests.
    pub fn demo() -> Self {
        Self::from_json(DEMO_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(map.into())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Category indices a token belongs to (each at most once).
    pub fn categories_of(&self, token: &str) -> Vec<usize> {
        let mut hits = vec![false; self.len()];
        if let Some(cats) = self.exact.get(token) {
            for &c in cats {
                hits[c] = true;
            }
        }
        for (prefix, c) in &self.prefixes {
            if token.starts_with(prefix.as_str()) {
                hits[*c] = true;
            }
        }
        hits.iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .map(|(c, _)| c)
            .collect()
    }

    /// Per-category hit counts divided by the total token count.
    pub fn features_from_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if tokens.is_empty() {
            return out;
        }
        for t in tokens {
            for c in self.categories_of(t) {
                out[c] += 1.0;
            }
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|x| *x /= n);
        out
    }
}

/// Category frequencies over the concatenation of `docs`.
pub fn lexicon_features<S: AsRef<str>>(
    lex: &CategoryLexicon,
    tokenizer: &Tokenizer,
    docs: &[S],
) -> Vec<f64> {
    lex.features_from_tokens(&tokenizer.tokenize_all(docs))
}
