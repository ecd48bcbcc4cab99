//! Per-event surprise scores over fact fingerprints.
//!
//! One temporal pass over the message stream maintains an accumulated
//! fact set; each event's surprise is the fraction of its fingerprints
//! not seen before, plus small length, detail, and event bonuses, with a
//! contradiction bonus when an update-verb message conflicts with an
//! earlier fact. There is no learned predictor anywhere in this module:
//! the signal is computed directly from extracted fact sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::consolidate::{detect_contradiction, extract_assertions, Assertion};
use crate::error::Result;
use crate::store::Store;
use crate::text;

/// Fact fingerprint kinds, from cheapest to extract to richest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    Number,
    ProperNoun,
    Date,
    EventKeyword,
    Definitional,
}

/// A normalized fact fingerprint. Values are case-folded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactFingerprint {
    pub kind: FactKind,
    pub value: String,
}

/// Surprise score for one event, in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurpriseScore {
    pub event_id: u64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct PredictiveConfig {
    pub novel_weight: f64,
    pub length_bonus: f64,
    pub detail_bonus: f64,
    pub event_bonus: f64,
    pub contradiction_bonus: f64,
    /// Character count above which the length bonus applies.
    pub length_threshold: usize,
    /// Fingerprint count at which the detail bonus applies.
    pub detail_threshold: usize,
    pub update_verbs: Vec<String>,
    pub event_keywords: Vec<String>,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        fn list(items: &[&str]) -> Vec<String> {
            items.iter().map(|s| s.to_string()).collect()
        }
        PredictiveConfig {
            novel_weight: 0.6,
            length_bonus: 0.1,
            detail_bonus: 0.1,
            event_bonus: 0.1,
            contradiction_bonus: 0.2,
            length_threshold: 150,
            detail_threshold: 3,
            update_verbs: list(&[
                "actually",
                "instead",
                "changed",
                "moved to",
                "no longer",
                "now",
                "update",
            ]),
            event_keywords: list(&[
                "meeting",
                "wedding",
                "birthday",
                "trip",
                "interview",
                "appointment",
                "party",
                "conference",
                "deadline",
                "flight",
                "launch",
                "exam",
                "concert",
                "reunion",
                "visit",
                "anniversary",
            ]),
        }
    }
}

fn proper_nouns(text_in: &str) -> Vec<String> {
    let mut out = Vec::new();
    for sentence in text::sentences(text_in) {
        for (i, word) in text::words(sentence).iter().enumerate() {
            if i == 0 {
                continue; // sentence-initial capitalization is not a cue
            }
            let mut chars = word.chars();
            let Some(first) = chars.next() else { continue };
            if first.is_uppercase() && word.to_lowercase() != "i" {
                out.push(word.to_lowercase());
            }
        }
    }
    out
}

/// Extracts the fingerprint set for one event text. `sender` resolves
/// first-person definitional facts.
pub fn fingerprints_for(
    text_in: &str,
    sender: &str,
    cfg: &PredictiveConfig,
) -> BTreeSet<FactFingerprint> {
    let mut set = BTreeSet::new();
    for token in text::numeric_tokens(text_in) {
        set.insert(FactFingerprint {
            kind: FactKind::Number,
            value: token,
        });
    }
    for mention in text::date_mentions(text_in) {
        set.insert(FactFingerprint {
            kind: FactKind::Date,
            value: mention,
        });
    }
    for noun in proper_nouns(text_in) {
        set.insert(FactFingerprint {
            kind: FactKind::ProperNoun,
            value: noun,
        });
    }
    let tokens = text::tokenize(text_in);
    for keyword in &cfg.event_keywords {
        if tokens.iter().any(|t| t == keyword) {
            set.insert(FactFingerprint {
                kind: FactKind::EventKeyword,
                value: keyword.clone(),
            });
        }
    }
    for (entity, predicate, value) in extract_assertions(text_in, sender) {
        set.insert(FactFingerprint {
            kind: FactKind::Definitional,
            value: format!(
                "{}|{}|{}",
                entity.to_lowercase(),
                predicate.to_lowercase(),
                value.to_lowercase()
            ),
        });
    }
    set
}

/// Fingerprints with no sender context (first-person facts are skipped).
pub fn fingerprints(text_in: &str) -> BTreeSet<FactFingerprint> {
    fingerprints_for(text_in, "", &PredictiveConfig::default())
}

fn has_update_verb(text_in: &str, cfg: &PredictiveConfig) -> bool {
    let lower = text_in.to_lowercase();
    cfg.update_verbs
        .iter()
        .any(|v| text::contains_phrase(&lower, v))
}

/// Rebuilds the surprise index with a single pass over the message stream
/// in (timestamp, id) order. Returns the number of scored events. The
/// rebuild is deterministic, so re-running on an unchanged store rewrites
/// nothing.
pub fn build_surprise_index(store: &mut Store, cfg: &PredictiveConfig) -> Result<usize> {
    let mut ordered: Vec<(i64, u64)> = store.messages().map(|e| (e.timestamp, e.id)).collect();
    ordered.sort_unstable();

    let mut accumulated: BTreeSet<FactFingerprint> = BTreeSet::new();
    // Latest assertion per case-folded (entity, predicate).
    let mut known_facts: BTreeMap<(String, String), Assertion> = BTreeMap::new();
    let mut scores: Vec<(u64, f64)> = Vec::with_capacity(ordered.len());

    for (ts, id) in ordered {
        let event = store.get_event(id).expect("message ids are valid");
        let prints = fingerprints_for(&event.text, &event.sender, cfg);
        let novel = prints.iter().filter(|p| !accumulated.contains(*p)).count();
        let novel_frac = novel as f64 / prints.len().max(1) as f64;

        let mut sigma = cfg.novel_weight * novel_frac;
        if event.text.chars().count() > cfg.length_threshold {
            sigma += cfg.length_bonus;
        }
        if prints.len() >= cfg.detail_threshold {
            sigma += cfg.detail_bonus;
        }
        if prints.iter().any(|p| p.kind == FactKind::EventKeyword) {
            sigma += cfg.event_bonus;
        }

        let assertions: Vec<Assertion> = extract_assertions(&event.text, &event.sender)
            .into_iter()
            .map(|(entity, predicate, value)| Assertion {
                entity,
                predicate,
                value,
                event_id: id,
                ts,
            })
            .collect();
        if has_update_verb(&event.text, cfg)
            && assertions.iter().any(|a| {
                known_facts
                    .get(&(a.entity.to_lowercase(), a.predicate.to_lowercase()))
                    .is_some_and(|prior| detect_contradiction(prior, a))
            })
        {
            sigma += cfg.contradiction_bonus;
        }

        scores.push((id, sigma.clamp(0.0, 1.0)));
        accumulated.extend(prints);
        for a in assertions {
            known_facts.insert((a.entity.to_lowercase(), a.predicate.to_lowercase()), a);
        }
    }

    let count = scores.len();
    store.set_surprise_snapshot(scores)?;
    Ok(count)
}
