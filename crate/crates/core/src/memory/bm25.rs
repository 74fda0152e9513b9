//! Okapi BM25 over a small in-memory corpus.
//!
//! Uses the non-negative IDF variant `ln(1 + (N - df + 0.5) / (df + 0.5))`,
//! so a document scores zero exactly when it shares no term with the query.

use std::collections::{HashMap, HashSet};

/// Lowercase and split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Term statistics for one corpus snapshot.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    docs: Vec<HashMap<String, usize>>,
    lengths: Vec<usize>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn new<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tfs = Vec::new();
        let mut lengths = Vec::new();
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let tokens = tokenize(doc);
            lengths.push(tokens.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for term in tf.keys() {
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
            tfs.push(tf);
        }
        let avg_len = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
        };
        Bm25Index {
            docs: tfs,
            lengths,
            doc_freq,
            avg_len,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = *self.doc_freq.get(term).unwrap_or(&0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Score every document against `query`. Repeated query terms count once.
    pub fn scores(&self, query: &str, params: Bm25Params) -> Vec<f64> {
        let mut seen = HashSet::new();
        let terms: Vec<String> = tokenize(query)
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect();
        let idfs: Vec<f64> = terms.iter().map(|t| self.idf(t)).collect();
        self.docs
            .iter()
            .zip(&self.lengths)
            .map(|(tf, len)| {
                let norm = if self.avg_len > 0.0 {
                    *len as f64 / self.avg_len
                } else {
                    0.0
                };
                terms
                    .iter()
                    .zip(&idfs)
                    .map(|(term, idf)| {
                        let f = *tf.get(term).unwrap_or(&0) as f64;
                        if f == 0.0 {
                            return 0.0;
                        }
                        idf * f * (params.k1 + 1.0)
                            / (f + params.k1 * (1.0 - params.b + params.b * norm))
                    })
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(
            tokenize("The audience has at least 5,000 users!"),
            vec!["the", "audience", "has", "at", "least", "5", "000", "users"]
        );
        assert_eq!(tokenize("web_destinations"), vec!["web", "destinations"]);
        assert!(tokenize("  --  ").is_empty());
    }

    #[test]
    fn disjoint_documents_score_zero() {
        let idx = Bm25Index::new(["alpha beta", "gamma delta"]);
        let s = idx.scores("alpha", Bm25Params::default());
        assert!(s[0] > 0.0);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn empty_corpus() {
        let idx = Bm25Index::new(std::iter::empty());
        assert!(idx.scores("anything", Bm25Params::default()).is_empty());
    }
}
