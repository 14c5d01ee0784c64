use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            ..Default::default()
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Fitted vocabulary and smoothed inverse document frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfParts")]
pub struct TfidfModel {
    pub tokenizer: Tokenizer,
    /// Terms in lexicographic order; a term's position is its column.
    terms: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct TfidfParts {
    tokenizer: Tokenizer,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl From<TfidfParts> for TfidfModel {
    fn from(p: TfidfParts) -> Self {
        TfidfModel::from_parts(p.tokenizer, p.terms, p.idf)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub tokenizer: Tokenizer,
    /// Keep only the most frequent terms (by document frequency).
    pub max_features: Option<usize>,
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            tokenizer: Tokenizer::default(),
            max_features: None,
            min_df: 1,
        }
    }
}

impl TfidfModel {
    /// idf(t) = ln((1 + N) / (1 + df(t))) + 1
    pub fn fit<S: AsRef<str>>(corpus: &[S], config: &TfidfConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut toks = config.tokenizer.tokenize(doc.as_ref());
            toks.sort_unstable();
            toks.dedup();
            for t in toks {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = df
            .into_iter()
            .filter(|(_, d)| *d >= config.min_df.max(1))
            .collect();
        if let Some(max) = config.max_features {
            if kept.len() > max {
                kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                kept.truncate(max);
                kept.sort_by(|a, b| a.0.cmp(&b.0));
            }
        }
        let n = corpus.len() as f64;
        let idf = kept
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        let terms = kept.into_iter().map(|(t, _)| t).collect();
        Ok(TfidfModel::from_parts(config.tokenizer.clone(), terms, idf))
    }

    fn from_parts(tokenizer: Tokenizer, terms: Vec<String>, idf: Vec<f64>) -> Self {
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfModel {
            tokenizer,
            terms,
            idf,
            lookup,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.lookup.get(term).copied()
    }

    /// L2-normalized tf·idf weights; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, doc: &str) -> SparseVec {
        self.transform_tokens(&self.tokenizer.tokenize(doc))
    }

    pub fn transform_tokens(&self, tokens: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.lookup.get(t) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut v = SparseVec {
            dim: self.vocab_size(),
            indices: Vec::with_capacity(counts.len()),
            values: Vec::with_capacity(counts.len()),
        };
        for (i, tf) in counts {
            v.indices.push(i);
            v.values.push(tf * self.idf[i]);
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}
