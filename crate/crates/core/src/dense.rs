//! Dense-vector retrieval: an exact cosine scan over all stored vectors.
//!
//! At conversational scale (thousands to tens of thousands of rows) a full
//! scan is cheap and trivially correct, so there is no approximate index.
//! Ties break by ascending event id.

use crate::embed::cosine;

/// One dense search result. Cosines are non-increasing with rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHit {
    pub event_id: u64,
    pub cosine: f64,
    pub rank: usize,
}

/// Stored vectors in event-id order.
#[derive(Debug, Default)]
pub struct DenseIndex {
    rows: Vec<(u64, Vec<f32>)>,
}

impl DenseIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a vector. Ids must arrive in ascending order.
    pub fn insert(&mut self, event_id: u64, vector: Vec<f32>) {
        debug_assert!(self.rows.last().is_none_or(|(id, _)| *id < event_id));
        self.rows.push((event_id, vector));
    }

    pub fn vector(&self, event_id: u64) -> Option<&[f32]> {
        self.rows
            .binary_search_by_key(&event_id, |(id, _)| *id)
            .ok()
            .map(|i| self.rows[i].1.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f32])> {
        self.rows.iter().map(|(id, v)| (*id, v.as_slice()))
    }

    /// Exact top-k by cosine against every stored vector.
    pub fn search(&self, query: &[f32], k: usize) -> Vec<DenseHit> {
        if k == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(u64, f64)> = self
            .rows
            .iter()
            .map(|(id, v)| (*id, cosine(query, v)))
            .collect();
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
            .into_iter()
            .enumerate()
            .map(|(i, (event_id, cos))| DenseHit {
                event_id,
                cosine: cos,
                rank: i + 1,
            })
            .collect()
    }
}
