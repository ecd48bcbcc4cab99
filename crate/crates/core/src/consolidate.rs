//! Batch consolidation: clusters recent events by episode, emits one
//! extractive summary per cluster, detects contradictions between
//! assertions about the same (entity, predicate), and maintains the
//! supersession-linked fact timeline.
//!
//! Assertion extraction is a closed, deterministic pattern list: copula
//! forms ("X is Y", "X is in Y"), location verbs ("lives in", "moved
//! to"), and possession ("X's birthday is ..."). First-person subjects
//! resolve to the sender. Summaries are extractive (top sentences by
//! salience); hosts that want abstractive summaries can plug a
//! [`Summarizer`] into the engine.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event::{Episode, Event, EventInput, Modality};
use crate::salience::{hybrid_salience, SalienceConfig};
use crate::store::Store;
use crate::text;

/// One extracted (entity, predicate, value) triple tied to its source
/// event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub entity: String,
    pub predicate: String,
    pub value: String,
    pub event_id: u64,
    pub ts: i64,
}

/// Extractive summary of one cluster. `event_id` is the substrate row the
/// summary text was written to (modality = summary), which keeps it
/// retrievable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: u64,
    pub cluster_id: u64,
    pub text: String,
    pub source_event_ids: Vec<u64>,
    pub created_ts: i64,
    pub event_id: u64,
}

/// Two events whose claims about the same (entity, predicate) conflict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContradictionRecord {
    pub entity: String,
    pub predicate: String,
    pub event_id_a: u64,
    pub event_id_b: u64,
    pub detected_ts: i64,
}

/// A timeline row. Supersession links are derived from chain order, so
/// following them always moves forward in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineAssertion {
    pub id: u64,
    pub entity: String,
    pub predicate: String,
    pub value: String,
    pub event_id: u64,
    pub ts: i64,
    pub superseded_by: Option<u64>,
}

/// Which recent events a consolidation run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Last two episodes or last `window_events` events, whichever set is
    /// smaller.
    Default,
    /// The last n message events in time order.
    Events(usize),
    /// Message events within this many seconds of the newest one.
    Seconds(i64),
}

#[derive(Debug, Clone)]
pub struct ConsolidatorConfig {
    pub window_episodes: usize,
    pub window_events: usize,
    /// How many top-salience sentences an extractive summary keeps.
    pub summary_sentences: usize,
}

impl Default for ConsolidatorConfig {
    fn default() -> Self {
        ConsolidatorConfig {
            window_episodes: 2,
            window_events: 200,
            summary_sentences: 3,
        }
    }
}

/// Optional abstractive-summary hook. When present, its output replaces
/// the extractive summary text for a cluster.
pub trait Summarizer: Send + Sync {
    fn summarize(&self, cluster_texts: &[&str]) -> Option<String>;
}

/// Artifacts newly produced by one consolidation run.
#[derive(Debug, Default, Clone, PartialEq, Serialize)]
pub struct ConsolidateReport {
    pub summaries: Vec<SummaryRecord>,
    pub contradictions: Vec<ContradictionRecord>,
    pub timeline_deltas: Vec<TimelineAssertion>,
}

const LOCATION_PREDICATE: &str = "lives_in";

fn strip_possessive(word: &str) -> Option<&str> {
    word.strip_suffix("'s")
        .or_else(|| word.strip_suffix("\u{2019}s"))
}

fn is_first_person(word: &str) -> bool {
    matches!(word.to_lowercase().as_str(), "i" | "my" | "me" | "mine")
}

/// Subject of a clause given the words before the verb. Resolution order:
/// possession ("Alice's birthday", "my birthday"), first person, trailing
/// capitalized run, "the <noun>".
fn resolve_subject(pre: &[String], sender: &str) -> Option<(String, Option<String>)> {
    if pre.is_empty() {
        return None;
    }
    // Possession: owner + noun as the last two words before the verb.
    if pre.len() >= 2 {
        let noun = &pre[pre.len() - 1];
        let owner_word = &pre[pre.len() - 2];
        if let Some(owner) = strip_possessive(owner_word) {
            if !owner.is_empty() && !noun.is_empty() {
                return Some((owner.to_string(), Some(noun.to_lowercase())));
            }
        }
        if owner_word.to_lowercase() == "my" && !sender.is_empty() {
            return Some((sender.to_string(), Some(noun.to_lowercase())));
        }
    }
    let last = &pre[pre.len() - 1];
    if is_first_person(last) {
        if sender.is_empty() {
            return None;
        }
        return Some((sender.to_string(), None));
    }
    // Trailing run of capitalized words: "Alice", "New York".
    let mut start = pre.len();
    while start > 0 && text::starts_uppercase(&pre[start - 1]) {
        start -= 1;
    }
    if start < pre.len() {
        let run = pre[start..].join(" ");
        if run.to_lowercase() != "i" {
            return Some((run, None));
        } else if !sender.is_empty() {
            return Some((sender.to_string(), None));
        }
        return None;
    }
    // "the <noun>" subjects: common for shared objects like "the meeting".
    if pre.len() >= 2 && pre[pre.len() - 2].to_lowercase() == "the" {
        return Some((last.to_lowercase(), None));
    }
    None
}

/// Deterministic pattern extraction of (entity, predicate, value) triples.
/// At most one assertion per sentence; the first matching verb wins.
pub fn extract_assertions(text_in: &str, sender: &str) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for sentence in text::sentences(text_in) {
        let words = text::words(sentence);
        let mut extracted = None;
        for (i, word) in words.iter().enumerate() {
            let lower = word.to_lowercase();
            let next = words.get(i + 1).map(|w| w.to_lowercase());
            // Location verbs: "lives in", "moved to".
            let location = matches!(
                (lower.as_str(), next.as_deref()),
                ("lives" | "lived" | "living", Some("in"))
                    | ("moved" | "moves" | "moving", Some("to"))
            );
            if location {
                if let Some((entity, _)) = resolve_subject(&words[..i], sender) {
                    let value = words[i + 2..].join(" ");
                    if !value.is_empty() {
                        extracted = Some((entity, LOCATION_PREDICATE.to_string(), value));
                    }
                }
                break;
            }
            // Copula: "X is Y", "X was Y", possibly "X is in Y".
            if lower == "is" || lower == "was" {
                if let Some((entity, noun)) = resolve_subject(&words[..i], sender) {
                    let mut rest = &words[i + 1..];
                    let mut predicate = noun.unwrap_or_else(|| "is".to_string());
                    if predicate == "is" && rest.first().is_some_and(|w| w.to_lowercase() == "in") {
                        predicate = "in".to_string();
                        rest = &rest[1..];
                    }
                    let value = rest.join(" ");
                    if !value.is_empty() {
                        extracted = Some((entity, predicate, value));
                    }
                }
                break;
            }
        }
        if let Some(triple) = extracted {
            out.push(triple);
        }
    }
    out
}

/// True iff both assertions concern the same entity and predicate
/// (case-folded), carry different values (case-folded), and `b` is later
/// than `a`.
pub fn detect_contradiction(a: &Assertion, b: &Assertion) -> bool {
    a.entity.to_lowercase() == b.entity.to_lowercase()
        && a.predicate.to_lowercase() == b.predicate.to_lowercase()
        && a.value.to_lowercase() != b.value.to_lowercase()
        && (b.ts, b.event_id) > (a.ts, a.event_id)
}

/// Message event ids covered by the window, in (ts, id) order.
fn window_event_ids(store: &Store, window: Window, cfg: &ConsolidatorConfig) -> Vec<u64> {
    let mut msgs: Vec<&Event> = store.messages().collect();
    msgs.sort_by_key(|e| (e.timestamp, e.id));
    match window {
        Window::Events(n) => {
            let skip = msgs.len().saturating_sub(n);
            msgs[skip..].iter().map(|e| e.id).collect()
        }
        Window::Seconds(span) => {
            let Some(max_ts) = msgs.last().map(|e| e.timestamp) else {
                return Vec::new();
            };
            msgs.iter()
                .filter(|e| e.timestamp >= max_ts - span)
                .map(|e| e.id)
                .collect()
        }
        Window::Default => {
            let episodes = store.rebuild_episodes();
            let from_episodes: usize = episodes
                .iter()
                .rev()
                .take(cfg.window_episodes)
                .map(|ep| ep.event_ids.len())
                .sum();
            let n = from_episodes.min(cfg.window_events);
            window_event_ids(store, Window::Events(n), cfg)
        }
    }
}

/// Runs one consolidation pass. Idempotent: re-running over the same
/// window adds no rows because every artifact is keyed by its content.
pub fn consolidate(
    store: &mut Store,
    window: Window,
    cfg: &ConsolidatorConfig,
    salience_cfg: &SalienceConfig,
    summarizer: Option<&dyn Summarizer>,
) -> Result<ConsolidateReport> {
    let mut report = ConsolidateReport::default();
    let window_ids = window_event_ids(store, window, cfg);
    if window_ids.is_empty() {
        return Ok(report);
    }
    let in_window: std::collections::HashSet<u64> = window_ids.iter().copied().collect();

    // Clusters are episodes intersected with the window.
    let episodes: Vec<Episode> = store.rebuild_episodes();
    let mut clusters: Vec<(u64, Vec<u64>)> = Vec::new();
    for ep in &episodes {
        let ids: Vec<u64> = ep
            .event_ids
            .iter()
            .copied()
            .filter(|id| in_window.contains(id))
            .collect();
        if !ids.is_empty() {
            clusters.push((ep.id, ids));
        }
    }

    for (cluster_id, ids) in &clusters {
        // Extractive summary: top sentences (one per event) by salience,
        // presented in chronological order.
        let mut scored: Vec<(u64, f64)> = ids
            .iter()
            .map(|&id| {
                let event = store.get_event(id).expect("cluster ids are valid");
                (id, hybrid_salience(&event.text, salience_cfg).value)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(cfg.summary_sentences);
        let mut source_ids: Vec<u64> = scored.iter().map(|(id, _)| *id).collect();
        source_ids.sort_unstable();
        if store.has_summary_for(&source_ids) {
            continue;
        }
        let texts: Vec<&str> = source_ids
            .iter()
            .map(|&id| store.get_event(id).unwrap().text.as_str())
            .collect();
        let summary_text = summarizer
            .and_then(|s| s.summarize(&texts))
            .unwrap_or_else(|| texts.join("\n"));
        let created_ts = source_ids
            .iter()
            .map(|&id| store.get_event(id).unwrap().timestamp)
            .max()
            .unwrap_or(0);
        let summary_event = store.append_event(
            EventInput::new(summary_text.clone())
                .modality(Modality::Summary)
                .timestamp(created_ts),
        )?;
        let record = SummaryRecord {
            id: store.next_summary_id(),
            cluster_id: *cluster_id,
            text: summary_text,
            source_event_ids: source_ids,
            created_ts,
            event_id: summary_event.id,
        };
        store.add_summary(record.clone())?;
        report.summaries.push(record);
    }

    // Assertions and contradictions over the window, in time order.
    let mut window_assertions: Vec<Assertion> = Vec::new();
    for &id in &window_ids {
        let event = store.get_event(id).expect("window ids are valid");
        for (entity, predicate, value) in extract_assertions(&event.text, &event.sender) {
            window_assertions.push(Assertion {
                entity,
                predicate,
                value,
                event_id: event.id,
                ts: event.timestamp,
            });
        }
    }
    window_assertions.sort_by_key(|a| (a.ts, a.event_id));

    for assertion in window_assertions {
        // Latest earlier assertion in the same (entity, predicate) chain.
        let prior: Option<Assertion> = store
            .timeline()
            .iter()
            .filter(|t| {
                t.entity.to_lowercase() == assertion.entity.to_lowercase()
                    && t.predicate.to_lowercase() == assertion.predicate.to_lowercase()
                    && (t.ts, t.event_id) < (assertion.ts, assertion.event_id)
            })
            .max_by_key(|t| (t.ts, t.event_id))
            .map(|t| Assertion {
                entity: t.entity.clone(),
                predicate: t.predicate.clone(),
                value: t.value.clone(),
                event_id: t.event_id,
                ts: t.ts,
            });

        let added = store.add_assertion(
            assertion.entity.clone(),
            assertion.predicate.clone(),
            assertion.value.clone(),
            assertion.event_id,
            assertion.ts,
        )?;
        if let Some(new_id) = added {
            if let Some(prior) = prior {
                if detect_contradiction(&prior, &assertion) {
                    let record = ContradictionRecord {
                        entity: assertion.entity.clone(),
                        predicate: assertion.predicate.clone(),
                        event_id_a: prior.event_id,
                        event_id_b: assertion.event_id,
                        detected_ts: assertion.ts,
                    };
                    if store.add_contradiction(record.clone())? {
                        report.contradictions.push(record);
                    }
                }
            }
            if let Some(stored) = store.timeline().into_iter().find(|t| t.id == new_id) {
                report.timeline_deltas.push(stored);
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::NgramHashEmbedder;
    use std::sync::Arc;
    use tempfile::tempdir;

    fn triple(e: &str, p: &str, v: &str) -> (String, String, String) {
        (e.to_string(), p.to_string(), v.to_string())
    }

    #[test]
    fn extracts_location_assertion() {
        assert_eq!(
            extract_assertions("Alice lives in Lisbon", "bob"),
            vec![triple("Alice", "lives_in", "Lisbon")]
        );
        assert_eq!(
            extract_assertions("Alice moved to Porto", "bob"),
            vec![triple("Alice", "lives_in", "Porto")]
        );
    }

    #[test]
    fn first_person_resolves_to_sender() {
        assert_eq!(
            extract_assertions("I moved to Porto", "Bob"),
            vec![triple("Bob", "lives_in", "Porto")]
        );
        assert_eq!(
            extract_assertions("My birthday is March 3", "Bob"),
            vec![triple("Bob", "birthday", "March 3")]
        );
        // No sender known: first-person facts are skipped.
        assert!(extract_assertions("I moved to Porto", "").is_empty());
    }

    #[test]
    fn possession_and_copula_patterns() {
        assert_eq!(
            extract_assertions("Alice's office is room 401", "x"),
            vec![triple("Alice", "office", "room 401")]
        );
        assert_eq!(
            extract_assertions("Alice is happy today", "x"),
            vec![triple("Alice", "is", "happy today")]
        );
        assert_eq!(
            extract_assertions("The meeting is in room 401", "x"),
            vec![triple("meeting", "in", "room 401")]
        );
    }

    #[test]
    fn noise_extracts_nothing() {
        assert!(extract_assertions("ok", "bob").is_empty());
        assert!(extract_assertions("sounds good", "bob").is_empty());
    }

    #[test]
    fn multi_sentence_texts_extract_per_sentence() {
        let got = extract_assertions("Alice lives in Lisbon. Bob moved to Porto.", "x");
        assert_eq!(
            got,
            vec![
                triple("Alice", "lives_in", "Lisbon"),
                triple("Bob", "lives_in", "Porto")
            ]
        );
    }

    fn assertion(e: &str, p: &str, v: &str, id: u64, ts: i64) -> Assertion {
        Assertion {
            entity: e.into(),
            predicate: p.into(),
            value: v.into(),
            event_id: id,
            ts,
        }
    }

    #[test]
    fn contradiction_requires_same_slot_different_value_later_time() {
        let a = assertion("Alice", "lives_in", "Lisbon", 1, 100);
        let b = assertion("Alice", "lives_in", "Porto", 2, 200);
        assert!(detect_contradiction(&a, &b));
        // Same value: no contradiction.
        let b2 = assertion("Alice", "lives_in", "Lisbon", 2, 200);
        assert!(!detect_contradiction(&a, &b2));
        // Different predicate: no contradiction.
        let b3 = assertion("Alice", "birthday", "Porto", 2, 200);
        assert!(!detect_contradiction(&a, &b3));
        // Earlier in time: no contradiction.
        assert!(!detect_contradiction(&b, &a));
        // Case-folded comparison.
        let b4 = assertion("alice", "LIVES_IN", "porto", 2, 200);
        assert!(detect_contradiction(&a, &b4));
    }

    fn store_with(texts: &[(&str, &str, i64)]) -> (tempfile::TempDir, Store) {
        let dir = tempdir().unwrap();
        let mut store =
            Store::open(dir.path().join("m.tm"), Arc::new(NgramHashEmbedder::new())).unwrap();
        for (text, sender, ts) in texts {
            store
                .append_event(EventInput::new(*text).sender(*sender).timestamp(*ts))
                .unwrap();
        }
        (dir, store)
    }

    #[test]
    fn empty_store_consolidates_to_nothing() {
        let (_dir, mut store) = store_with(&[]);
        let report = consolidate(
            &mut store,
            Window::Default,
            &ConsolidatorConfig::default(),
            &SalienceConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(report, ConsolidateReport::default());
    }

    #[test]
    fn conflicting_episode_produces_summary_contradiction_and_linked_timeline() {
        let (_dir, mut store) = store_with(&[
            ("Alice lives in Lisbon", "alice", 100),
            ("Alice moved to Porto", "alice", 200),
        ]);
        let report = consolidate(
            &mut store,
            Window::Default,
            &ConsolidatorConfig::default(),
            &SalienceConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.summaries.len(), 1);
        assert_eq!(report.contradictions.len(), 1);
        assert_eq!(report.timeline_deltas.len(), 2);
        let c = &report.contradictions[0];
        assert_eq!((c.event_id_a, c.event_id_b), (1, 2));

        let timeline = store.timeline();
        assert_eq!(timeline.len(), 2);
        let first = timeline.iter().find(|t| t.event_id == 1).unwrap();
        let second = timeline.iter().find(|t| t.event_id == 2).unwrap();
        assert_eq!(first.superseded_by, Some(second.id));
        assert_eq!(second.superseded_by, None);

        // The summary re-entered the substrate as a summary-modality event.
        let summary_event = store.get_event(report.summaries[0].event_id).unwrap();
        assert_eq!(summary_event.modality, Modality::Summary);
    }

    #[test]
    fn rerun_adds_nothing() {
        let (_dir, mut store) = store_with(&[
            ("Alice lives in Lisbon", "alice", 100),
            ("Alice moved to Porto", "alice", 200),
            ("the weather was nice", "bob", 300),
        ]);
        let cfg = ConsolidatorConfig::default();
        let scfg = SalienceConfig::default();
        consolidate(&mut store, Window::Default, &cfg, &scfg, None).unwrap();
        let before = (
            store.summaries().len(),
            store.contradictions().len(),
            store.assertion_count(),
            store.event_count(),
        );
        let second = consolidate(&mut store, Window::Default, &cfg, &scfg, None).unwrap();
        assert_eq!(second, ConsolidateReport::default());
        let after = (
            store.summaries().len(),
            store.contradictions().len(),
            store.assertion_count(),
            store.event_count(),
        );
        assert_eq!(before, after);
    }

    #[test]
    fn summary_sources_exist_and_fall_in_cluster() {
        let (_dir, mut store) = store_with(&[
            (
                "we compared venue quotes for the June 2 wedding",
                "alice",
                100,
            ),
            ("ok", "bob", 160),
            (
                "the second quote includes catering for 45 guests",
                "alice",
                220,
            ),
            ("lol", "bob", 280),
        ]);
        let report = consolidate(
            &mut store,
            Window::Default,
            &ConsolidatorConfig::default(),
            &SalienceConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(report.summaries.len(), 1);
        let summary = &report.summaries[0];
        let episode = &store.rebuild_episodes()[(summary.cluster_id - 1) as usize];
        for id in &summary.source_event_ids {
            assert!(store.get_event(*id).is_ok());
            assert!(episode.event_ids.contains(id));
        }
    }

    #[test]
    fn windows_limit_scope() {
        let (_dir, mut store) = store_with(&[
            ("Alice lives in Lisbon", "alice", 100),
            ("Bob moved to Madrid", "bob", 100_000),
        ]);
        // Only the newest event falls in a 10-second window.
        let report = consolidate(
            &mut store,
            Window::Seconds(10),
            &ConsolidatorConfig::default(),
            &SalienceConfig::default(),
            None,
        )
        .unwrap();
        let entities: Vec<&str> = report
            .timeline_deltas
            .iter()
            .map(|t| t.entity.as_str())
            .collect();
        assert_eq!(entities, vec!["Bob"]);
    }
}
