//! Weighted reciprocal-rank fusion, the conditional reweighting pipeline,
//! and reranking with modality adjustment.
//!
//! Fusion consumes ranks, not scores: each candidate scores the weighted
//! sum of 1/(k + rank) over the rank lists containing it, k = 60. The
//! optional separation list joins only when the corpus has more than five
//! distinct senders, at 0.8x the dense weight. Reweighting applies, in
//! order: a conditional temporal boost, a conditional personality-prior
//! injection, the minimum-salience drop, and the surprise boost. Factors
//! whose trigger is false leave scores untouched. Reranking rescores
//! (query, text) pairs through a pluggable interface and adjusts summary
//! modalities by question type.

use std::collections::HashSet;
use std::sync::Arc;

use crate::dense::DenseHit;
use crate::engram;
use crate::event::Modality;
use crate::intent::{QueryIntent, QuestionType};
use crate::lexical::LexicalHit;
use crate::salience::{hybrid_salience, SalienceConfig};
use crate::store::Store;
use crate::text::tokenize;

/// Fusion and reweighting constants. `alpha_surprise` honors the
/// `TRUEMEMORY_ALPHA_SURPRISE` environment variable when configs load.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    pub k_rrf: f64,
    pub w_fts: f64,
    pub w_vec: f64,
    /// Separation-list weight as a fraction of `w_vec`.
    pub w_sep_factor: f64,
    /// The separation list participates only above this many distinct
    /// senders.
    pub sep_min_senders: usize,
    pub alpha_surprise: f64,
    pub temporal_boost: f64,
    pub profile_inject_factor: f64,
    pub style_inject_factor: f64,
    pub min_salience: f64,
    pub modality_detail_penalty: f64,
    pub modality_synthesis_boost: f64,
    pub prerank_window: usize,
    pub final_k: usize,
    pub profile_inject_limit: usize,
    pub style_inject_limit: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            k_rrf: 60.0,
            w_fts: 1.0,
            w_vec: 1.0,
            w_sep_factor: 0.8,
            sep_min_senders: 5,
            alpha_surprise: 0.2,
            temporal_boost: 1.3,
            profile_inject_factor: 0.8,
            style_inject_factor: 0.9,
            min_salience: 0.10,
            modality_detail_penalty: 0.7,
            modality_synthesis_boost: 1.2,
            prerank_window: 100,
            final_k: 10,
            profile_inject_limit: 3,
            style_inject_limit: 3,
        }
    }
}

/// A retrieved candidate carrying its per-source ranks and a running
/// scalar score through fusion, reweighting, and reranking. Candidates
/// with no source ranks were injected by the personality prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub event_id: u64,
    pub fts_rank: Option<usize>,
    pub vec_rank: Option<usize>,
    pub sep_rank: Option<usize>,
    pub score: f64,
    pub text: String,
    pub modality: Modality,
    pub salience: f64,
    pub sigma: f64,
    pub timestamp: i64,
    pub injected: bool,
}

impl Candidate {
    fn bare(event_id: u64) -> Self {
        Candidate {
            event_id,
            fts_rank: None,
            vec_rank: None,
            sep_rank: None,
            score: 0.0,
            text: String::new(),
            modality: Modality::Message,
            salience: 0.0,
            sigma: 0.0,
            timestamp: 0,
            injected: false,
        }
    }
}

fn sort_candidates(candidates: &mut [Candidate]) {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.event_id.cmp(&b.event_id))
    });
}

/// Weighted reciprocal-rank fusion over the lexical, dense, and optional
/// separation rank lists. `distinct_senders` controls the separation
/// trigger. Output is sorted by descending score, ties by ascending id.
pub fn rrf_fuse(
    lexical_hits: &[LexicalHit],
    dense_hits: &[DenseHit],
    sep_hits: Option<&[LexicalHit]>,
    distinct_senders: usize,
    cfg: &FusionConfig,
) -> Vec<Candidate> {
    let mut by_id: std::collections::BTreeMap<u64, Candidate> = std::collections::BTreeMap::new();
    for hit in lexical_hits {
        let c = by_id
            .entry(hit.event_id)
            .or_insert_with(|| Candidate::bare(hit.event_id));
        c.fts_rank = Some(hit.rank);
        c.score += cfg.w_fts / (cfg.k_rrf + hit.rank as f64);
    }
    for hit in dense_hits {
        let c = by_id
            .entry(hit.event_id)
            .or_insert_with(|| Candidate::bare(hit.event_id));
        c.vec_rank = Some(hit.rank);
        c.score += cfg.w_vec / (cfg.k_rrf + hit.rank as f64);
    }
    if distinct_senders > cfg.sep_min_senders {
        if let Some(sep) = sep_hits {
            let w_sep = cfg.w_sep_factor * cfg.w_vec;
            for hit in sep {
                let c = by_id
                    .entry(hit.event_id)
                    .or_insert_with(|| Candidate::bare(hit.event_id));
                c.sep_rank = Some(hit.rank);
                c.score += w_sep / (cfg.k_rrf + hit.rank as f64);
            }
        }
    }
    let mut fused: Vec<Candidate> = by_id.into_values().collect();
    sort_candidates(&mut fused);
    fused
}

fn enrich(store: &Store, candidate: &mut Candidate, salience_cfg: &SalienceConfig) {
    if let Ok(event) = store.get_event(candidate.event_id) {
        candidate.text = event.text.clone();
        candidate.modality = event.modality;
        candidate.timestamp = event.timestamp;
        candidate.salience = hybrid_salience(&event.text, salience_cfg).value;
        candidate.sigma = store.surprise_score(event.id).unwrap_or(0.0);
    }
}

/// The conditional reweighting pipeline, applied in order:
///
/// 1. temporal boost for candidates inside the query's time window;
/// 2. personality-prior injection of profile- and style-derived
///    candidates below the current maximum score;
/// 3. drop of candidates under the minimum salience;
/// 4. surprise boost `score * (1 + alpha * sigma)` for positive sigma,
///    a no-op while the surprise index is unbuilt.
///
/// Every factor with a false trigger is the identity on scores.
pub fn reweight(
    store: &Store,
    mut candidates: Vec<Candidate>,
    intent: &QueryIntent,
    cfg: &FusionConfig,
    salience_cfg: &SalienceConfig,
) -> Vec<Candidate> {
    for c in candidates.iter_mut() {
        enrich(store, c, salience_cfg);
    }

    if intent.temporal {
        if let Some((t0, t1)) = intent.time_window {
            for c in candidates.iter_mut() {
                if c.timestamp >= t0 && c.timestamp <= t1 {
                    c.score *= cfg.temporal_boost;
                }
            }
        }
    }

    if intent.personality {
        if let Some(focal) = intent.focal_entity.as_deref() {
            inject_personality_prior(store, &mut candidates, focal, cfg, salience_cfg);
        }
    }

    candidates.retain(|c| c.salience >= cfg.min_salience);

    if store.surprise_built() {
        for c in candidates.iter_mut() {
            if c.sigma > 0.0 {
                c.score *= 1.0 + cfg.alpha_surprise * c.sigma;
            }
        }
    }

    sort_candidates(&mut candidates);
    candidates
}

fn inject_personality_prior(
    store: &Store,
    candidates: &mut Vec<Candidate>,
    focal: &str,
    cfg: &FusionConfig,
    salience_cfg: &SalienceConfig,
) {
    let Some(entity) = engram::find_entity(store, focal) else {
        return;
    };
    let max_score = candidates.iter().map(|c| c.score).fold(0.0f64, f64::max);
    if max_score <= 0.0 {
        return;
    }
    let mut present: HashSet<u64> = candidates.iter().map(|c| c.event_id).collect();

    // Profile-derived: the events that produced preference attributes.
    if let Some(profile) = store.profile(entity) {
        for &id in profile
            .source_event_ids
            .iter()
            .take(cfg.profile_inject_limit)
        {
            if present.insert(id) {
                let mut c = Candidate::bare(id);
                c.injected = true;
                c.score = cfg.profile_inject_factor * max_score;
                enrich(store, &mut c, salience_cfg);
                candidates.push(c);
            }
        }
    }

    // Style-derived: messages closest to the entity's writing profile.
    if store.style_vector(entity).is_some() {
        let mut ranked: Vec<(u64, f64)> = store
            .messages()
            .filter(|e| !present.contains(&e.id))
            .map(|e| {
                (
                    e.id,
                    engram::style_score(store, entity, &e.text).unwrap_or(0.0),
                )
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (id, _) in ranked.into_iter().take(cfg.style_inject_limit) {
            present.insert(id);
            let mut c = Candidate::bare(id);
            c.injected = true;
            c.score = cfg.style_inject_factor * max_score;
            enrich(store, &mut c, salience_cfg);
            candidates.push(c);
        }
    }
}

/// Modality adjustment by question type: detail questions penalize
/// summaries, synthesis questions boost them, everything else passes
/// through.
pub fn modality_factor(question: QuestionType, modality: Modality, cfg: &FusionConfig) -> f64 {
    match (question, modality) {
        (QuestionType::Detail, Modality::Summary) => cfg.modality_detail_penalty,
        (QuestionType::Synthesis, Modality::Summary) => cfg.modality_synthesis_boost,
        _ => 1.0,
    }
}

/// Reranker failure for one pair; the candidate keeps its pre-rerank
/// score.
#[derive(Debug, thiserror::Error)]
#[error("reranker failed: {0}")]
pub struct RerankError(pub String);

/// Scores (query, candidate text) pairs. `prior` is the candidate's
/// pre-rerank score, which identity-style rerankers pass through.
pub trait Reranker: Send + Sync {
    fn name(&self) -> &str;

    fn rescore(&self, query: &str, text: &str, prior: f64)
        -> std::result::Result<f64, RerankError>;
}

/// Default reranker: idf-weighted query-token overlap, normalized to
/// [0, 1]. A deterministic, CPU-only stand-in for a cross-encoder.
pub struct IdfOverlapReranker {
    idf: Vec<(String, f64)>,
}

impl IdfOverlapReranker {
    /// Snapshots idf values for the query's tokens from the store's
    /// lexical statistics.
    pub fn for_query(store: &Store, query: &str) -> Self {
        let mut terms = tokenize(query);
        terms.sort_unstable();
        terms.dedup();
        let idf = terms.into_iter().map(|t| {
            let w = store.lexical().idf(&t);
            (t, w)
        });
        IdfOverlapReranker { idf: idf.collect() }
    }
}

impl Reranker for IdfOverlapReranker {
    fn name(&self) -> &str {
        "default"
    }

    fn rescore(&self, _query: &str, text: &str, _prior: f64) -> Result<f64, RerankError> {
        let denom: f64 = self.idf.iter().map(|(_, w)| w).sum();
        if denom <= 0.0 {
            return Ok(0.0);
        }
        let doc_tokens: HashSet<String> = tokenize(text).into_iter().collect();
        let overlap: f64 = self
            .idf
            .iter()
            .filter(|(t, _)| doc_tokens.contains(t))
            .map(|(_, w)| w)
            .sum();
        Ok(overlap / denom)
    }
}

/// Passes the pre-rerank score through; equivalent to disabling the
/// reranker for general questions.
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn name(&self) -> &str {
        "identity"
    }

    fn rescore(&self, _query: &str, _text: &str, prior: f64) -> Result<f64, RerankError> {
        Ok(prior)
    }
}

/// Which reranker the engine runs at stage ten.
#[derive(Clone)]
pub enum RerankerChoice {
    /// Idf-weighted token overlap.
    Default,
    /// Pass pre-rerank scores through (modality factors still apply).
    Identity,
    /// Skip the rerank stage entirely.
    None,
    External(Arc<dyn Reranker>),
}

impl RerankerChoice {
    pub fn name(&self) -> &str {
        match self {
            RerankerChoice::Default => "default",
            RerankerChoice::Identity => "identity",
            RerankerChoice::None => "none",
            RerankerChoice::External(r) => r.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "default" => Some(RerankerChoice::Default),
            "identity" => Some(RerankerChoice::Identity),
            "none" | "no-reranker" => Some(RerankerChoice::None),
            _ => None,
        }
    }
}

impl std::fmt::Debug for RerankerChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RerankerChoice({})", self.name())
    }
}

/// Reranks the candidates (already truncated to the pre-rerank window)
/// and returns the top `final_k`. A reranker failure on a pair degrades
/// that candidate to its pre-rerank score instead of failing the query.
pub fn rerank(
    query: &str,
    mut candidates: Vec<Candidate>,
    reranker: &dyn Reranker,
    question: QuestionType,
    cfg: &FusionConfig,
) -> Vec<Candidate> {
    for c in candidates.iter_mut() {
        if let Ok(score) = reranker.rescore(query, &c.text, c.score) {
            c.score = score * modality_factor(question, c.modality, cfg);
        }
    }
    sort_candidates(&mut candidates);
    candidates.truncate(cfg.final_k);
    candidates
}
