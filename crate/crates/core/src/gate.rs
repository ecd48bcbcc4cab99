//! The encoding gate: per-event novelty, salience, and prediction-error
//! signals combined into an admit decision.
//!
//! Novelty is a compression-cost ratio against the nearest stored
//! neighbors; prediction error is an embedding pair-difference score
//! against the single nearest neighbor; salience comes from the hybrid
//! scorer. The admit rule is a weighted mean of the three signals,
//! normalized by the weight sum, compared against a threshold plus a
//! per-category offset. Messages under the salience floor are rejected
//! outright. A disabled gate admits every event and computes nothing.

use std::collections::BTreeMap;
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::embed::cosine;
use crate::error::{Error, Result};
use crate::event::{Category, EventInput, GateSignals};
use crate::salience::{classify_speech_act, hybrid_salience, SalienceConfig};
use crate::store::Store;

/// Separator between the incoming event and its nearest memory in the
/// pair embeddings.
pub const PAIR_SEPARATOR: &str = " [SEP] ";

/// Compressed sizes below this mark a message as trivially short.
pub const TRIVIAL_COMPRESSED_BYTES: usize = 10;

/// Novelty assigned to trivially short messages.
pub const TRIVIAL_NOVELTY: f64 = 0.05;

/// Gate weights, threshold, and signal parameters.
#[derive(Debug, Clone)]
pub struct GateConfig {
    pub lambda_novelty: f64,
    pub lambda_salience: f64,
    pub lambda_prediction: f64,
    /// `None` disables the gate: every event is admitted.
    pub tau: Option<f64>,
    pub salience_floor: f64,
    /// Threshold offsets that lower the bar for high-value categories.
    pub category_offsets: BTreeMap<Category, f64>,
    /// How many nearest neighbors form the novelty context.
    pub neighbor_count: usize,
    /// Prediction error short-circuits to 0 when the nearest memory's
    /// cosine falls below this.
    pub relevance_cutoff: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        let mut category_offsets = BTreeMap::new();
        category_offsets.insert(Category::Correction, -0.06);
        category_offsets.insert(Category::Decision, -0.04);
        category_offsets.insert(Category::Relationship, -0.04);
        GateConfig {
            lambda_novelty: 0.25,
            lambda_salience: 0.20,
            lambda_prediction: 0.30,
            tau: Some(0.30),
            salience_floor: 0.10,
            category_offsets,
            neighbor_count: 5,
            relevance_cutoff: 0.15,
        }
    }
}

impl GateConfig {
    pub fn disabled() -> Self {
        GateConfig {
            tau: None,
            ..GateConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_novelty < 0.0 || self.lambda_salience < 0.0 || self.lambda_prediction < 0.0 {
            return Err(Error::InvalidGateConfig(
                "weights must be non-negative".into(),
            ));
        }
        if self.lambda_novelty + self.lambda_salience + self.lambda_prediction <= 0.0 {
            return Err(Error::InvalidGateConfig(
                "weight sum must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.salience_floor) {
            return Err(Error::InvalidGateConfig(
                "salience floor must be in [0,1]".into(),
            ));
        }
        Ok(())
    }

    pub fn offset(&self, category: Category) -> f64 {
        self.category_offsets.get(&category).copied().unwrap_or(0.0)
    }
}

/// Outcome of the gate for one event.
#[derive(Debug, Clone)]
pub struct GateDecision {
    pub admit: bool,
    /// Present whenever the gate actually ran (it is skipped entirely when
    /// disabled).
    pub signals: Option<GateSignals>,
    /// Category assigned by the classifier; overrides caller metadata when
    /// the gate is enabled.
    pub category: Option<Category>,
}

/// Raw DEFLATE (level 6) output size in bytes. The container-free stream
/// keeps tiny inputs in single-digit byte counts, which the trivially-short
/// rule depends on.
pub fn compressed_len(bytes: &[u8]) -> usize {
    let mut encoder = DeflateEncoder::new(Vec::new(), Compression::new(6));
    encoder
        .write_all(bytes)
        .expect("in-memory deflate cannot fail");
    encoder
        .finish()
        .expect("in-memory deflate cannot fail")
        .len()
}

/// Compression-cost novelty of `text` against the nearest stored
/// neighbors, clamped to [0, 1]. Returns exactly 1.0 on an empty store and
/// exactly 0.05 for trivially short messages.
pub fn novelty(store: &Store, text: &str, cfg: &GateConfig) -> f64 {
    if store.dense().is_empty() {
        return 1.0;
    }
    let event_cost = compressed_len(text.as_bytes());
    if event_cost < TRIVIAL_COMPRESSED_BYTES {
        return TRIVIAL_NOVELTY;
    }
    // Nearest neighbors in descending similarity, newline-joined; the
    // incoming event is appended after a final newline. gzip is
    // order-sensitive, so this layout is pinned.
    let neighbors = store.search_dense(text, cfg.neighbor_count.max(1));
    let memory: String = neighbors
        .iter()
        .map(|h| {
            store
                .get_event(h.event_id)
                .expect("hit ids are valid")
                .text
                .as_str()
        })
        .collect::<Vec<_>>()
        .join("\n");
    let memory_cost = compressed_len(memory.as_bytes());
    let joint = format!("{memory}\n{text}");
    let joint_cost = compressed_len(joint.as_bytes());
    let n = (joint_cost as f64 - memory_cost as f64) / event_cost as f64;
    n.clamp(0.0, 1.0)
}

/// Embedding pair-difference prediction error, clamped to [0, 1].
///
/// Early exits: noise-classified text scores 0 without touching the
/// embedder; text whose nearest memory is topically irrelevant (cosine
/// below the cutoff) scores 0; an empty store scores 0.
pub fn prediction_error(
    store: &Store,
    text: &str,
    cfg: &GateConfig,
    salience_cfg: &SalienceConfig,
) -> f64 {
    if classify_speech_act(text, salience_cfg).0 == Category::Noise {
        return 0.0;
    }
    if store.dense().is_empty() {
        return 0.0;
    }
    let embedder = store.embedder().clone();
    let query_vec = embedder.embed(text);
    let nearest = &store.search_dense_vec(&query_vec, 1)[0];
    let nearest_vec = store
        .dense()
        .vector(nearest.event_id)
        .expect("hit ids are valid");
    if cosine(&query_vec, nearest_vec) < cfg.relevance_cutoff {
        return 0.0;
    }
    let memory_text = &store
        .get_event(nearest.event_id)
        .expect("hit ids are valid")
        .text;
    let cross = embedder.embed(&format!("{text}{PAIR_SEPARATOR}{memory_text}"));
    let self_pair = embedder.embed(&format!("{memory_text}{PAIR_SEPARATOR}{memory_text}"));
    (1.0 - cosine(&cross, &self_pair)).clamp(0.0, 1.0)
}

/// The normalized weighted mean of the three signals. Lands in [0, 1] for
/// any non-negative weights with a positive sum.
pub fn gate_score(signals: &GateSignals, cfg: &GateConfig) -> f64 {
    (cfg.lambda_novelty * signals.novelty
        + cfg.lambda_salience * signals.salience
        + cfg.lambda_prediction * signals.prediction_error)
        / (cfg.lambda_novelty + cfg.lambda_salience + cfg.lambda_prediction)
}

/// Pure admit rule given already-computed signals: the salience floor
/// rejects regardless of score; otherwise the normalized score must reach
/// the threshold plus the category offset.
pub fn admit_with_signals(signals: &GateSignals, category: Category, cfg: &GateConfig) -> bool {
    let Some(tau) = cfg.tau else {
        return true;
    };
    if signals.salience < cfg.salience_floor {
        return false;
    }
    gate_score(signals, cfg) >= tau + cfg.offset(category)
}

/// Computes the three signals for an incoming event and decides admission.
/// A disabled gate admits immediately without computing signals.
pub fn gate_decide(
    store: &Store,
    input: &EventInput,
    cfg: &GateConfig,
    salience_cfg: &SalienceConfig,
) -> GateDecision {
    if cfg.tau.is_none() {
        return GateDecision {
            admit: true,
            signals: None,
            category: None,
        };
    }
    let scored = hybrid_salience(&input.text, salience_cfg);
    let signals = GateSignals {
        novelty: novelty(store, &input.text, cfg),
        salience: scored.value,
        prediction_error: prediction_error(store, &input.text, cfg, salience_cfg),
    };
    let admit = admit_with_signals(&signals, scored.category, cfg);
    GateDecision {
        admit,
        signals: Some(signals),
        category: Some(scored.category),
    }
}
