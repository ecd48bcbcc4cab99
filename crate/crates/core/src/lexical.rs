//! Full-text lexical retrieval over event text.
//!
//! An in-memory inverted index scored with BM25 (k1 = 1.2, b = 0.75,
//! idf = ln(1 + (N - df + 0.5) / (df + 0.5))). Query tokens are
//! OR-combined with set semantics; a document scores on every distinct
//! query token it contains. Ties break by ascending event id.

use std::collections::HashMap;

use crate::text::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// One lexical search result. Ranks are contiguous from 1 and scores are
/// non-increasing with rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalHit {
    pub event_id: u64,
    pub bm25_score: f64,
    pub rank: usize,
}

/// Inverted index over tokenized event text. Rebuilt from the event log on
/// open; writes are serialized with the store's single writer.
#[derive(Debug, Default)]
pub struct LexicalIndex {
    postings: HashMap<String, Vec<(u64, u32)>>,
    doc_len: HashMap<u64, usize>,
    total_len: usize,
}

impl LexicalIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_len.len()
    }

    /// Document frequency of a single token.
    pub fn df(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, Vec::len)
    }

    /// idf under the non-negative BM25 variant used throughout.
    pub fn idf(&self, token: &str) -> f64 {
        bm25_idf(self.doc_count(), self.df(token))
    }

    /// Adds one document. Event ids must be inserted in ascending order so
    /// posting lists stay id-sorted.
    pub fn insert(&mut self, event_id: u64, text: &str) {
        let tokens = tokenize(text);
        self.total_len += tokens.len();
        self.doc_len.insert(event_id, tokens.len());
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (token, count) in tf {
            self.postings
                .entry(token)
                .or_default()
                .push((event_id, count));
        }
    }

    /// Top-k documents by BM25. Empty query after tokenization yields an
    /// empty result.
    pub fn search(&self, query: &str, k: usize) -> Vec<LexicalHit> {
        if k == 0 || self.doc_count() == 0 {
            return Vec::new();
        }
        let mut terms = tokenize(query);
        terms.sort_unstable();
        terms.dedup();
        if terms.is_empty() {
            return Vec::new();
        }

        let n_docs = self.doc_count();
        let avgdl = self.total_len as f64 / n_docs as f64;
        let mut scores: HashMap<u64, f64> = HashMap::new();
        for term in &terms {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = bm25_idf(n_docs, postings.len());
            for &(event_id, tf) in postings {
                let dl = self.doc_len[&event_id] as f64;
                *scores.entry(event_id).or_insert(0.0) +=
                    idf * bm25_tf_norm(f64::from(tf), dl, avgdl);
            }
        }

        let mut ranked: Vec<(u64, f64)> = scores.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
            .into_iter()
            .enumerate()
            .map(|(i, (event_id, bm25_score))| LexicalHit {
                event_id,
                bm25_score,
                rank: i + 1,
            })
            .collect()
    }
}

pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    (1.0 + (n_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

pub fn bm25_tf_norm(tf: f64, dl: f64, avgdl: f64) -> f64 {
    tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl))
}
