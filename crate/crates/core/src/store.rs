//! Verbatim event store with single-file persistence.
//!
//! Everything the engine persists lives in exactly one file: a fixed
//! header (magic, schema version, embedder identity) followed by
//! length-prefixed, checksummed JSON records. Events are appended with
//! their dense vector in the same record, so a crash can never leave a
//! row without its index entries: a record is either fully readable or
//! discarded as a torn tail on the next open. The lexical and dense
//! indices are rebuilt deterministically from the log on open.
//!
//! Batch artifacts (summaries, contradictions, timeline assertions,
//! surprise scores, engrams) are records in the same log. Snapshot-style
//! records (surprise, engrams) replace their predecessor on replay.
//!
//! Concurrency model: single writer, any number of readers. The handle is
//! `Send`; sharing it across threads requires external coordination, which
//! ordinary `&mut`/`&` borrows already enforce.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consolidate::{ContradictionRecord, SummaryRecord, TimelineAssertion};
use crate::dense::DenseIndex;
use crate::embed::{fnv1a64, Embedder};
use crate::engram::EntityProfile;
use crate::error::{Error, Result};
use crate::event::{
    Category, Episode, Event, EventInput, GateSignals, Modality, EPISODE_GAP_SECONDS,
};
use crate::lexical::LexicalIndex;

const MAGIC: &[u8; 4] = b"TMEM";
pub const SCHEMA_VERSION: u32 = 1;

/// One persisted log record.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Record {
    Event {
        event: Event,
        vector: Vec<f32>,
    },
    Summary(SummaryRecord),
    Contradiction(ContradictionRecord),
    Assertion(PersistedAssertion),
    SurpriseSnapshot {
        scores: Vec<(u64, f64)>,
    },
    EngramSnapshot {
        profiles: Vec<EntityProfile>,
        styles: Vec<(String, Vec<f32>)>,
    },
    // Reserved schema slots; nothing populates these yet.
    #[allow(dead_code)]
    LandmarkEvent {
        data: serde_json::Value,
    },
    #[allow(dead_code)]
    CausalEdge {
        data: serde_json::Value,
    },
    #[allow(dead_code)]
    EntityRelationship {
        data: serde_json::Value,
    },
}

/// Timeline assertions persist without their supersession link; links are
/// derived from chain order on load, which keeps them consistent even when
/// a later batch backfills an older assertion.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersistedAssertion {
    id: u64,
    entity: String,
    predicate: String,
    value: String,
    event_id: u64,
    ts: i64,
}

/// The verbatim event substrate plus every derived structure the query
/// path reads.
pub struct Store {
    path: PathBuf,
    file: File,
    schema_version: u32,
    embedder: Arc<dyn Embedder>,
    events: Vec<Event>,
    lexical: LexicalIndex,
    dense: DenseIndex,
    summaries: Vec<SummaryRecord>,
    summary_keys: HashSet<Vec<u64>>,
    contradictions: Vec<ContradictionRecord>,
    contradiction_keys: HashSet<(String, String, u64, u64)>,
    assertions: Vec<PersistedAssertion>,
    assertion_keys: HashSet<(String, String, String, u64)>,
    surprise: HashMap<u64, f64>,
    profiles: BTreeMap<String, EntityProfile>,
    styles: BTreeMap<String, Vec<f32>>,
}

impl Store {
    /// Opens or creates the store at `path`. A fresh file is initialized
    /// with the current schema version and the configured embedder's
    /// identity; an existing file must carry a supported schema version
    /// and the same embedder identity.
    pub fn open(path: impl AsRef<Path>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let existing = match std::fs::metadata(&path) {
            Ok(meta) => meta.len() > 0,
            Err(_) => false,
        };

        let mut store = Store {
            path: path.clone(),
            file: OpenOptions::new()
                .create(true)
                .truncate(false)
                .read(true)
                .write(true)
                .open(&path)?,
            schema_version: SCHEMA_VERSION,
            embedder,
            events: Vec::new(),
            lexical: LexicalIndex::new(),
            dense: DenseIndex::new(),
            summaries: Vec::new(),
            summary_keys: HashSet::new(),
            contradictions: Vec::new(),
            contradiction_keys: HashSet::new(),
            assertions: Vec::new(),
            assertion_keys: HashSet::new(),
            surprise: HashMap::new(),
            profiles: BTreeMap::new(),
            styles: BTreeMap::new(),
        };

        if existing {
            store.load()?;
        } else {
            store.write_header()?;
        }
        Ok(store)
    }

    fn corrupt(&self, detail: impl Into<String>) -> Error {
        Error::CorruptStore {
            path: self.path.clone(),
            detail: detail.into(),
        }
    }

    fn write_header(&mut self) -> Result<()> {
        let name = self.embedder.name().as_bytes();
        let mut buf = Vec::with_capacity(12 + name.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    fn load(&mut self) -> Result<()> {
        let bytes = std::fs::read(&self.path)?;
        if bytes.len() < 12 || &bytes[0..4] != MAGIC {
            return Err(self.corrupt("bad magic or short header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version > SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version,
                supported: SCHEMA_VERSION,
            });
        }
        self.schema_version = version;
        let name_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if bytes.len() < 12 + name_len {
            return Err(self.corrupt("truncated embedder identity"));
        }
        let stored_name = std::str::from_utf8(&bytes[12..12 + name_len])
            .map_err(|_| self.corrupt("embedder identity is not utf-8"))?
            .to_string();
        if stored_name != self.embedder.name() {
            return Err(Error::EmbedderMismatch {
                stored: stored_name,
                configured: self.embedder.name().to_string(),
            });
        }

        // Replay records; a torn tail marks the recovery point.
        let mut offset = 12 + name_len;
        let mut valid_len = offset;
        while offset < bytes.len() {
            if offset + 12 > bytes.len() {
                break; // torn length/checksum prefix
            }
            let len = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
            let checksum = u64::from_le_bytes(bytes[offset + 4..offset + 12].try_into().unwrap());
            let start = offset + 12;
            if start + len > bytes.len() {
                break; // torn payload
            }
            let payload = &bytes[start..start + len];
            if fnv1a64(payload, 0) != checksum {
                break; // torn or interrupted write
            }
            let record: Record = serde_json::from_slice(payload)
                .map_err(|e| self.corrupt(format!("record: {e}")))?;
            self.apply(record)?;
            offset = start + len;
            valid_len = offset;
        }

        if valid_len < bytes.len() {
            // Drop the torn tail so future appends start from a clean edge.
            self.file.set_len(valid_len as u64)?;
            self.file.sync_data()?;
        }
        self.file.seek(SeekFrom::End(0))?;
        Ok(())
    }

    fn apply(&mut self, record: Record) -> Result<()> {
        match record {
            Record::Event { event, vector } => {
                if event.id != self.events.len() as u64 + 1 {
                    return Err(self.corrupt(format!("non-sequential event id {}", event.id)));
                }
                self.lexical.insert(event.id, &event.text);
                self.dense.insert(event.id, vector);
                self.events.push(event);
            }
            Record::Summary(s) => {
                self.summary_keys.insert(s.source_event_ids.clone());
                self.summaries.push(s);
            }
            Record::Contradiction(c) => {
                self.contradiction_keys.insert((
                    c.entity.clone(),
                    c.predicate.clone(),
                    c.event_id_a,
                    c.event_id_b,
                ));
                self.contradictions.push(c);
            }
            Record::Assertion(a) => {
                self.assertion_keys.insert((
                    a.entity.clone(),
                    a.predicate.clone(),
                    a.value.clone(),
                    a.event_id,
                ));
                self.assertions.push(a);
            }
            Record::SurpriseSnapshot { scores } => {
                self.surprise = scores.into_iter().collect();
            }
            Record::EngramSnapshot { profiles, styles } => {
                self.profiles = profiles
                    .into_iter()
                    .map(|p| (p.entity.clone(), p))
                    .collect();
                self.styles = styles.into_iter().collect();
            }
            Record::LandmarkEvent { .. }
            | Record::CausalEdge { .. }
            | Record::EntityRelationship { .. } => {}
        }
        Ok(())
    }

    fn write_record(&mut self, record: &Record) -> Result<()> {
        let payload = serde_json::to_vec(record)?;
        let mut buf = Vec::with_capacity(12 + payload.len());
        buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        buf.extend_from_slice(&fnv1a64(&payload, 0).to_le_bytes());
        buf.extend_from_slice(&payload);
        self.file.write_all(&buf)?;
        Ok(())
    }

    /// Flushes OS buffers to disk. Called at batch boundaries and on drop;
    /// record framing already guarantees atomicity without it.
    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn embedder_identity(&self) -> &str {
        self.embedder.name()
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    // ── Events ────────────────────────────────────────────────────

    /// Appends one event with no gate signals attached.
    pub fn append_event(&mut self, input: EventInput) -> Result<Event> {
        self.append_event_tagged(input, None)
    }

    /// Appends one event, persisting the row and both index updates as a
    /// single record. `text` is stored byte-identical to the input.
    pub fn append_event_tagged(
        &mut self,
        input: EventInput,
        signal_tags: Option<GateSignals>,
    ) -> Result<Event> {
        if input.text.is_empty() {
            return Err(Error::EmptyText);
        }
        if input.timestamp < 0 {
            return Err(Error::NegativeTimestamp(input.timestamp));
        }
        let event = Event {
            id: self.events.len() as u64 + 1,
            text: input.text,
            sender: input.sender,
            recipient: input.recipient,
            timestamp: input.timestamp,
            category: input.category.unwrap_or(Category::Statement),
            modality: input.modality.unwrap_or(Modality::Message),
            signal_tags,
        };
        let vector = self.embedder.embed(&event.text);
        self.write_record(&Record::Event {
            event: event.clone(),
            vector: vector.clone(),
        })?;
        self.lexical.insert(event.id, &event.text);
        self.dense.insert(event.id, vector);
        self.events.push(event.clone());
        Ok(event)
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn get_event(&self, id: u64) -> Result<&Event> {
        if id == 0 || id as usize > self.events.len() {
            return Err(Error::UnknownEvent(id));
        }
        Ok(&self.events[id as usize - 1])
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Message-modality events in id order.
    pub fn messages(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| e.modality == Modality::Message)
    }

    pub fn message_count(&self) -> usize {
        self.messages().count()
    }

    /// Distinct non-empty senders across message events.
    pub fn distinct_senders(&self) -> usize {
        self.messages()
            .filter(|e| !e.sender.is_empty())
            .map(|e| e.sender.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Events with `from_ts <= timestamp <= to_ts`, ordered by
    /// (timestamp, id).
    pub fn list_events(&self, from_ts: i64, to_ts: i64) -> Vec<&Event> {
        let mut hits: Vec<&Event> = self
            .events
            .iter()
            .filter(|e| e.timestamp >= from_ts && e.timestamp <= to_ts)
            .collect();
        hits.sort_by_key(|e| (e.timestamp, e.id));
        hits
    }

    /// Partitions message events into episodes wherever the gap between
    /// time-adjacent messages reaches six hours. Pure derivation from the
    /// event stream, so it is idempotent by construction.
    pub fn rebuild_episodes(&self) -> Vec<Episode> {
        let mut msgs: Vec<&Event> = self.messages().collect();
        msgs.sort_by_key(|e| (e.timestamp, e.id));
        let mut episodes: Vec<Episode> = Vec::new();
        for event in msgs {
            let split = match episodes.last() {
                None => true,
                Some(ep) => event.timestamp - ep.end_ts >= EPISODE_GAP_SECONDS,
            };
            if split {
                episodes.push(Episode {
                    id: episodes.len() as u64 + 1,
                    start_ts: event.timestamp,
                    end_ts: event.timestamp,
                    event_ids: vec![event.id],
                });
            } else {
                let ep = episodes.last_mut().unwrap();
                ep.end_ts = event.timestamp;
                ep.event_ids.push(event.id);
            }
        }
        episodes
    }

    // ── Search surfaces ───────────────────────────────────────────

    pub fn lexical(&self) -> &LexicalIndex {
        &self.lexical
    }

    pub fn dense(&self) -> &DenseIndex {
        &self.dense
    }

    pub fn search_lexical(&self, query: &str, k: usize) -> Vec<crate::lexical::LexicalHit> {
        self.lexical.search(query, k)
    }

    pub fn search_dense(&self, query_text: &str, k: usize) -> Vec<crate::dense::DenseHit> {
        self.dense.search(&self.embedder.embed(query_text), k)
    }

    pub fn search_dense_vec(&self, query: &[f32], k: usize) -> Vec<crate::dense::DenseHit> {
        self.dense.search(query, k)
    }

    // ── Batch artifacts ───────────────────────────────────────────

    pub fn summaries(&self) -> &[SummaryRecord] {
        &self.summaries
    }

    pub fn has_summary_for(&self, source_event_ids: &[u64]) -> bool {
        self.summary_keys.contains(source_event_ids)
    }

    /// Persists a summary artifact. The caller has already appended the
    /// summary's substrate event.
    pub fn add_summary(&mut self, record: SummaryRecord) -> Result<()> {
        self.write_record(&Record::Summary(record.clone()))?;
        self.summary_keys.insert(record.source_event_ids.clone());
        self.summaries.push(record);
        Ok(())
    }

    pub fn next_summary_id(&self) -> u64 {
        self.summaries.len() as u64 + 1
    }

    pub fn contradictions(&self) -> &[ContradictionRecord] {
        &self.contradictions
    }

    /// Adds a contradiction record unless the same pair is already known.
    /// Returns whether a new row was written.
    pub fn add_contradiction(&mut self, record: ContradictionRecord) -> Result<bool> {
        let key = (
            record.entity.clone(),
            record.predicate.clone(),
            record.event_id_a,
            record.event_id_b,
        );
        if self.contradiction_keys.contains(&key) {
            return Ok(false);
        }
        self.write_record(&Record::Contradiction(record.clone()))?;
        self.contradiction_keys.insert(key);
        self.contradictions.push(record);
        Ok(true)
    }

    /// Adds a timeline assertion unless an identical one exists. Returns
    /// the stored assertion id, or None when deduplicated away.
    pub fn add_assertion(
        &mut self,
        entity: String,
        predicate: String,
        value: String,
        event_id: u64,
        ts: i64,
    ) -> Result<Option<u64>> {
        let key = (entity.clone(), predicate.clone(), value.clone(), event_id);
        if self.assertion_keys.contains(&key) {
            return Ok(None);
        }
        let record = PersistedAssertion {
            id: self.assertions.len() as u64 + 1,
            entity,
            predicate,
            value,
            event_id,
            ts,
        };
        self.write_record(&Record::Assertion(record.clone()))?;
        self.assertion_keys.insert(key);
        let id = record.id;
        self.assertions.push(record);
        Ok(Some(id))
    }

    /// All timeline assertions with supersession links derived from chain
    /// order: within one (entity, predicate) chain, each assertion is
    /// superseded by the next in (ts, event_id, id) order.
    pub fn timeline(&self) -> Vec<TimelineAssertion> {
        let mut by_chain: BTreeMap<(&str, &str), Vec<&PersistedAssertion>> = BTreeMap::new();
        for a in &self.assertions {
            by_chain
                .entry((a.entity.as_str(), a.predicate.as_str()))
                .or_default()
                .push(a);
        }
        let mut out: Vec<TimelineAssertion> = Vec::new();
        for (_, mut chain) in by_chain {
            chain.sort_by_key(|a| (a.ts, a.event_id, a.id));
            for (i, a) in chain.iter().enumerate() {
                out.push(TimelineAssertion {
                    id: a.id,
                    entity: a.entity.clone(),
                    predicate: a.predicate.clone(),
                    value: a.value.clone(),
                    event_id: a.event_id,
                    ts: a.ts,
                    superseded_by: chain.get(i + 1).map(|next| next.id),
                });
            }
        }
        out.sort_by_key(|a| a.id);
        out
    }

    pub fn assertion_count(&self) -> usize {
        self.assertions.len()
    }

    // ── Surprise scores ───────────────────────────────────────────

    pub fn surprise_score(&self, event_id: u64) -> Option<f64> {
        self.surprise.get(&event_id).copied()
    }

    pub fn surprise_built(&self) -> bool {
        !self.surprise.is_empty()
    }

    pub fn surprise_count(&self) -> usize {
        self.surprise.len()
    }

    /// Replaces the surprise index. Skips the write when the snapshot is
    /// identical to the current one, keeping batch reruns append-free.
    pub fn set_surprise_snapshot(&mut self, mut scores: Vec<(u64, f64)>) -> Result<bool> {
        scores.sort_by_key(|(id, _)| *id);
        let current: Vec<(u64, f64)> = {
            let mut v: Vec<(u64, f64)> = self.surprise.iter().map(|(k, v)| (*k, *v)).collect();
            v.sort_by_key(|(id, _)| *id);
            v
        };
        if current == scores {
            return Ok(false);
        }
        self.write_record(&Record::SurpriseSnapshot {
            scores: scores.clone(),
        })?;
        self.surprise = scores.into_iter().collect();
        Ok(true)
    }

    // ── Engrams ───────────────────────────────────────────────────

    pub fn profiles(&self) -> &BTreeMap<String, EntityProfile> {
        &self.profiles
    }

    pub fn profile(&self, entity: &str) -> Option<&EntityProfile> {
        self.profiles.get(entity)
    }

    pub fn style_vector(&self, entity: &str) -> Option<&[f32]> {
        self.styles.get(entity).map(Vec::as_slice)
    }

    pub fn styles(&self) -> &BTreeMap<String, Vec<f32>> {
        &self.styles
    }

    /// Replaces all engram rows. Skips the write when nothing changed.
    pub fn set_engrams(
        &mut self,
        profiles: BTreeMap<String, EntityProfile>,
        styles: BTreeMap<String, Vec<f32>>,
    ) -> Result<bool> {
        if profiles == self.profiles && styles == self.styles {
            return Ok(false);
        }
        self.write_record(&Record::EngramSnapshot {
            profiles: profiles.values().cloned().collect(),
            styles: styles.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        })?;
        self.profiles = profiles;
        self.styles = styles;
        Ok(true)
    }
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("schema_version", &self.schema_version)
            .field("embedder", &self.embedder.name())
            .field("events", &self.events.len())
            .finish_non_exhaustive()
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        let _ = self.file.sync_data();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{norm, NgramHashEmbedder, TokenHashEmbedder};
    use tempfile::tempdir;

    fn default_embedder() -> Arc<dyn Embedder> {
        Arc::new(NgramHashEmbedder::new())
    }

    fn msg(text: &str, ts: i64) -> EventInput {
        EventInput::new(text).sender("alice").timestamp(ts)
    }

    #[test]
    fn fresh_store_is_empty_with_schema_v1() {
        let dir = tempdir().unwrap();
        let store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        assert_eq!(store.schema_version(), 1);
        assert_eq!(store.event_count(), 0);
        assert!(store.rebuild_episodes().is_empty());
    }

    #[test]
    fn ids_start_at_one_and_increase() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        let first = store.append_event(msg("first", 1)).unwrap();
        assert_eq!(first.id, 1);
        let second = store.append_event(msg("second", 2)).unwrap();
        assert_eq!(second.id, 2);
    }

    #[test]
    fn duplicates_are_kept_verbatim() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        store.append_event(msg("ok", 5)).unwrap();
        store.append_event(msg("ok", 5)).unwrap();
        assert_eq!(store.event_count(), 2);
        assert_eq!(store.get_event(1).unwrap().text, "ok");
        assert_eq!(store.get_event(2).unwrap().text, "ok");
    }

    #[test]
    fn empty_text_rejected() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        assert!(matches!(
            store.append_event(EventInput::new("")),
            Err(Error::EmptyText)
        ));
    }

    #[test]
    fn negative_timestamp_rejected() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        let err = store.append_event(msg("x", -3)).unwrap_err();
        assert!(matches!(err, Error::NegativeTimestamp(-3)));
    }

    #[test]
    fn reopen_preserves_events_and_ids() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            for i in 0..100 {
                store
                    .append_event(msg(&format!("event number {i}"), i))
                    .unwrap();
            }
        }
        let store = Store::open(&path, default_embedder()).unwrap();
        assert_eq!(store.event_count(), 100);
        for i in 1..=100u64 {
            assert_eq!(store.get_event(i).unwrap().id, i);
        }
    }

    #[test]
    fn round_trip_text_is_byte_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        let texts = [
            "plain",
            "unicode ﬀ ég 日本語",
            "  spaces  kept  ",
            "emoji 🎉 and \t tab",
        ];
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            for t in texts {
                store.append_event(msg(t, 0)).unwrap();
            }
        }
        let store = Store::open(&path, default_embedder()).unwrap();
        for (i, t) in texts.iter().enumerate() {
            assert_eq!(
                store.get_event(i as u64 + 1).unwrap().text.as_bytes(),
                t.as_bytes()
            );
        }
    }

    #[test]
    fn summary_modality_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            store
                .append_event(EventInput::new("cluster recap").modality(Modality::Summary))
                .unwrap();
        }
        let store = Store::open(&path, default_embedder()).unwrap();
        let event = store.get_event(1).unwrap();
        assert_eq!(event.modality, Modality::Summary);
        // Retrievable through the lexical index like any other event.
        assert_eq!(store.search_lexical("recap", 5)[0].event_id, 1);
    }

    #[test]
    fn embedder_mismatch_on_reopen_is_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            store.append_event(msg("hello", 0)).unwrap();
        }
        let err = Store::open(&path, Arc::new(TokenHashEmbedder)).unwrap_err();
        match err {
            Error::EmbedderMismatch { stored, configured } => {
                assert_eq!(stored, "default-hash-256");
                assert_eq!(configured, "token-hash-256");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn newer_schema_version_is_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = Store::open(&path, default_embedder()).unwrap_err();
        assert!(matches!(
            err,
            Error::SchemaVersion {
                found: 99,
                supported: 1
            }
        ));
    }

    #[test]
    fn corrupt_magic_is_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        std::fs::write(&path, b"NOPE0000junk").unwrap();
        assert!(matches!(
            Store::open(&path, default_embedder()),
            Err(Error::CorruptStore { .. })
        ));
    }

    #[test]
    fn torn_tail_recovers_to_record_boundary() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            for i in 0..5 {
                store
                    .append_event(msg(&format!("message body {i}"), i))
                    .unwrap();
            }
        }
        let full = std::fs::read(&path).unwrap();
        // Cut the file at every byte position past the header and verify
        // each prefix opens to a whole-record state: every surviving event
        // is fully intact in row and indices.
        let header_len = 12 + "default-hash-256".len();
        for cut in (header_len..full.len()).step_by(97) {
            let cut_path = dir.path().join(format!("cut{cut}.tm"));
            std::fs::write(&cut_path, &full[..cut]).unwrap();
            let store = Store::open(&cut_path, default_embedder()).unwrap();
            let n = store.event_count();
            assert!(n <= 5);
            for id in 1..=n as u64 {
                let event = store.get_event(id).unwrap();
                assert_eq!(event.text, format!("message body {}", id - 1));
                // Index entries exist for exactly the surviving rows.
                assert!(store
                    .search_lexical(&format!("{}", id - 1), 10)
                    .iter()
                    .any(|h| h.event_id == id));
                assert!(store.dense().vector(id).is_some());
            }
            assert_eq!(store.dense().len(), n);
        }
    }

    #[test]
    fn append_after_recovery_works() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            store.append_event(msg("kept message", 1)).unwrap();
            store.append_event(msg("torn message", 2)).unwrap();
        }
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 3]).unwrap();
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            assert_eq!(store.event_count(), 1);
            store.append_event(msg("fresh message", 3)).unwrap();
        }
        let store = Store::open(&path, default_embedder()).unwrap();
        assert_eq!(store.event_count(), 2);
        assert_eq!(store.get_event(2).unwrap().text, "fresh message");
    }

    #[test]
    fn episode_partition_follows_six_hour_gaps() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        // Gaps of 1h, 7h, 1h over four events: two episodes of two.
        let t0 = 1_000_000i64;
        for (i, ts) in [
            t0,
            t0 + 3_600,
            t0 + 3_600 + 25_200,
            t0 + 3_600 + 25_200 + 3_600,
        ]
        .iter()
        .enumerate()
        {
            store.append_event(msg(&format!("m{i}"), *ts)).unwrap();
        }
        let episodes = store.rebuild_episodes();
        assert_eq!(episodes.len(), 2);
        assert_eq!(episodes[0].event_ids, vec![1, 2]);
        assert_eq!(episodes[1].event_ids, vec![3, 4]);
        // Idempotent.
        assert_eq!(store.rebuild_episodes(), episodes);
    }

    #[test]
    fn single_event_is_one_episode() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        store.append_event(msg("solo", 42)).unwrap();
        let episodes = store.rebuild_episodes();
        assert_eq!(episodes.len(), 1);
        assert_eq!(episodes[0].event_ids, vec![1]);
    }

    #[test]
    fn exact_six_hour_gap_splits() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        store.append_event(msg("a", 0)).unwrap();
        store.append_event(msg("b", EPISODE_GAP_SECONDS)).unwrap();
        assert_eq!(store.rebuild_episodes().len(), 2);
    }

    #[test]
    fn episodes_partition_the_message_stream() {
        // Pseudo-random gap pattern: episodes must cover every message
        // exactly once, contain no internal 6h gap, and be separated by
        // at least 6h at each boundary.
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        let mut state = 0x5eed_cafe_f00du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut ts = 1_000i64;
        for i in 0..120 {
            store.append_event(msg(&format!("m{i}"), ts)).unwrap();
            ts += if next() % 5 == 0 {
                EPISODE_GAP_SECONDS + (next() % 10_000) as i64
            } else {
                (next() % (EPISODE_GAP_SECONDS as u64 - 1)) as i64
            };
        }

        let episodes = store.rebuild_episodes();
        let mut covered: Vec<u64> = Vec::new();
        for (i, ep) in episodes.iter().enumerate() {
            let stamps: Vec<i64> = ep
                .event_ids
                .iter()
                .map(|&id| store.get_event(id).unwrap().timestamp)
                .collect();
            assert_eq!(ep.start_ts, *stamps.first().unwrap());
            assert_eq!(ep.end_ts, *stamps.last().unwrap());
            for pair in stamps.windows(2) {
                assert!(pair[1] - pair[0] < EPISODE_GAP_SECONDS, "internal gap in episode");
            }
            if i > 0 {
                assert!(ep.start_ts - episodes[i - 1].end_ts >= EPISODE_GAP_SECONDS);
            }
            covered.extend(&ep.event_ids);
        }
        covered.sort_unstable();
        let all: Vec<u64> = store.messages().map(|e| e.id).collect();
        assert_eq!(covered, all, "episodes must partition the stream");
    }

    #[test]
    fn list_events_matches_exhaustive_filter() {
        let dir = tempdir().unwrap();
        let mut store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        let stamps = [50i64, 10, 30, 10, 70, 20];
        for (i, ts) in stamps.iter().enumerate() {
            store.append_event(msg(&format!("e{i}"), *ts)).unwrap();
        }
        let (from, to) = (10, 30);
        let got: Vec<u64> = store.list_events(from, to).iter().map(|e| e.id).collect();
        // Exhaustive-scan oracle over all events.
        let mut expected: Vec<(i64, u64)> = stamps
            .iter()
            .enumerate()
            .map(|(i, ts)| (*ts, i as u64 + 1))
            .filter(|(ts, _)| *ts >= from && *ts <= to)
            .collect();
        expected.sort();
        assert_eq!(got, expected.iter().map(|(_, id)| *id).collect::<Vec<_>>());
        assert!(store.list_events(1000, 2000).is_empty());
    }

    #[test]
    fn unknown_event_id_is_error() {
        let dir = tempdir().unwrap();
        let store = Store::open(dir.path().join("m.tm"), default_embedder()).unwrap();
        assert!(matches!(store.get_event(1), Err(Error::UnknownEvent(1))));
        assert!(matches!(store.get_event(0), Err(Error::UnknownEvent(0))));
    }

    #[test]
    fn vectors_read_back_unit_norm() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        {
            let mut store = Store::open(&path, default_embedder()).unwrap();
            for t in [
                "short",
                "a somewhat longer message with more going on",
                "ok",
            ] {
                store.append_event(msg(t, 0)).unwrap();
            }
        }
        let store = Store::open(&path, default_embedder()).unwrap();
        for (_, v) in store.dense().iter() {
            assert!((norm(v) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn store_is_a_single_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tm");
        let mut store = Store::open(&path, default_embedder()).unwrap();
        store.append_event(msg("hello there", 0)).unwrap();
        store.sync().unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn handle_is_send() {
        fn assert_send<T: Send>() {}
        assert_send::<Store>();
    }
}
