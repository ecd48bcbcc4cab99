//! Per-speaker engrams: a preference attribute map and a char-n-gram
//! style vector, refreshed in batch and used at query time as a
//! retrieval prior.
//!
//! The style vector is the L2-normalized mean of the speaker's
//! per-message n-gram vectors (the same gram scheme the default embedder
//! uses). Preference attributes come from a closed pattern list:
//! "I like/love/prefer/enjoy X" stores `{head-noun-of-X: likes}`,
//! "I hate/dislike X" stores `{head-noun-of-X: dislikes}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, ngram_vector, DIM};
use crate::error::Result;
use crate::store::Store;
use crate::text;

/// Speaker-preference attribute map; one row per distinct entity.
/// `source_event_ids` records which events contributed attributes, which
/// the retrieval prior uses to inject concrete candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub entity: String,
    pub attributes: BTreeMap<String, String>,
    pub updated_ts: i64,
    pub source_event_ids: Vec<u64>,
}

const LIKE_MARKERS: [&str; 5] = ["like", "love", "prefer", "enjoy", "adore"];
const DISLIKE_MARKERS: [&str; 3] = ["hate", "dislike", "detest"];
const OBJECT_SKIP_WORDS: [&str; 9] = ["to", "the", "a", "an", "my", "our", "this", "that", "going"];

/// Preference patterns in one text: (attribute key, polarity value,
/// matched) pairs.
fn preferences(text_in: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for sentence in text::sentences(text_in) {
        let tokens = text::tokenize(sentence);
        for (i, token) in tokens.iter().enumerate() {
            if i == 0 || tokens[i - 1] != "i" {
                continue;
            }
            let polarity = if LIKE_MARKERS.contains(&token.as_str()) {
                "likes"
            } else if DISLIKE_MARKERS.contains(&token.as_str()) {
                "dislikes"
            } else {
                continue;
            };
            // Head noun: first object token that is not a particle.
            let head = tokens[i + 1..]
                .iter()
                .find(|t| !OBJECT_SKIP_WORDS.contains(&t.as_str()));
            if let Some(head) = head {
                out.push((head.clone(), polarity.to_string()));
            }
        }
    }
    out
}

/// Mean of per-message n-gram vectors, L2-normalized, computed in f64 and
/// stored as f32. Exactly: normalize(sum(normalize(v_i)) / n).
pub fn mean_pool_style(texts: &[&str]) -> Vec<f32> {
    let mut acc = vec![0.0f64; DIM];
    for text_in in texts {
        let v = ngram_vector(text_in); // already unit norm
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += f64::from(*x);
        }
    }
    let n = texts.len().max(1) as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for a in acc.iter_mut() {
            *a /= norm;
        }
    } else {
        acc[0] = 1.0;
    }
    acc.into_iter().map(|x| x as f32).collect()
}

/// Rebuilds every speaker's profile and style vector from their full
/// message history. Returns the number of entities refreshed. Idempotent:
/// an unchanged store produces an identical snapshot, which is skipped.
pub fn update_engrams(store: &mut Store) -> Result<usize> {
    let mut by_sender: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for event in store.messages() {
        if event.sender.is_empty() {
            continue;
        }
        by_sender
            .entry(event.sender.clone())
            .or_default()
            .push(event.id);
    }

    let mut profiles: BTreeMap<String, EntityProfile> = BTreeMap::new();
    let mut styles: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for (entity, ids) in &by_sender {
        let texts: Vec<&str> = ids
            .iter()
            .map(|&id| store.get_event(id).unwrap().text.as_str())
            .collect();
        styles.insert(entity.clone(), mean_pool_style(&texts));

        let mut attributes = BTreeMap::new();
        let mut source_event_ids = Vec::new();
        let mut updated_ts = 0;
        for &id in ids {
            let event = store.get_event(id).unwrap();
            updated_ts = updated_ts.max(event.timestamp);
            let found = preferences(&event.text);
            if !found.is_empty() {
                source_event_ids.push(id);
            }
            for (key, value) in found {
                attributes.insert(key, value); // latest statement wins
            }
        }
        profiles.insert(
            entity.clone(),
            EntityProfile {
                entity: entity.clone(),
                attributes,
                updated_ts,
                source_event_ids,
            },
        );
    }

    let count = profiles.len();
    store.set_engrams(profiles, styles)?;
    Ok(count)
}

/// Cosine of the entity's style vector against the candidate text's
/// n-gram vector. None when the entity has no style vector, which callers
/// treat as an absent prior.
pub fn style_score(store: &Store, entity: &str, candidate_text: &str) -> Option<f64> {
    let style = store.style_vector(entity)?;
    Some(cosine(style, &ngram_vector(candidate_text)))
}

/// Case-insensitive profile lookup, for query-side entity names that may
/// not match sender casing.
pub fn find_entity<'a>(store: &'a Store, name: &str) -> Option<&'a str> {
    let folded = name.to_lowercase();
    store
        .profiles()
        .keys()
        .find(|k| k.to_lowercase() == folded)
        .map(String::as_str)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::NgramHashEmbedder;
    use crate::event::EventInput;
    use std::sync::Arc;
    use tempfile::tempdir;

    fn store_with(messages: &[(&str, &str, i64)]) -> (tempfile::TempDir, Store) {
        let dir = tempdir().unwrap();
        let mut store =
            Store::open(dir.path().join("m.tm"), Arc::new(NgramHashEmbedder::new())).unwrap();
        for (text, sender, ts) in messages {
            store
                .append_event(EventInput::new(*text).sender(*sender).timestamp(*ts))
                .unwrap();
        }
        (dir, store)
    }

    #[test]
    fn preference_patterns() {
        assert_eq!(
            preferences("I love hiking"),
            vec![("hiking".to_string(), "likes".to_string())]
        );
        assert_eq!(
            preferences("I hate the rain in winter"),
            vec![("rain".to_string(), "dislikes".to_string())]
        );
        assert_eq!(
            preferences("I like to swim"),
            vec![("swim".to_string(), "likes".to_string())]
        );
        assert!(preferences("she loves hiking").is_empty());
        assert!(preferences("ok").is_empty());
    }

    #[test]
    fn profile_from_preference_message() {
        let (_dir, mut store) = store_with(&[("I love hiking", "Alice", 100)]);
        let refreshed = update_engrams(&mut store).unwrap();
        assert_eq!(refreshed, 1);
        let profile = store.profile("Alice").unwrap();
        assert_eq!(
            profile.attributes.get("hiking").map(String::as_str),
            Some("likes")
        );
        assert_eq!(profile.source_event_ids, vec![1]);
        assert_eq!(profile.updated_ts, 100);
    }

    #[test]
    fn later_preference_wins() {
        let (_dir, mut store) = store_with(&[
            ("I love coffee", "Alice", 100),
            ("I hate coffee", "Alice", 200),
        ]);
        update_engrams(&mut store).unwrap();
        let profile = store.profile("Alice").unwrap();
        assert_eq!(
            profile.attributes.get("coffee").map(String::as_str),
            Some("dislikes")
        );
    }

    #[test]
    fn zero_message_entity_has_no_row() {
        let (_dir, mut store) = store_with(&[("hello world", "Alice", 1)]);
        update_engrams(&mut store).unwrap();
        assert!(store.profile("Bob").is_none());
        assert!(store.style_vector("Bob").is_none());
        assert!(style_score(&store, "Bob", "anything").is_none());
    }

    #[test]
    fn single_message_style_equals_its_ngram_vector() {
        let text = "a single message defines the style";
        let (_dir, mut store) = store_with(&[(text, "Alice", 1)]);
        update_engrams(&mut store).unwrap();
        let style = store.style_vector("Alice").unwrap();
        let direct = ngram_vector(text);
        for (a, b) in style.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        let score = style_score(&store, "Alice", text).unwrap();
        assert!((score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_pool_matches_direct_computation() {
        let texts: Vec<&str> = vec![
            "good morning, shall we review the notes",
            "gonna be late lol",
            "the quarterly numbers look fine to me",
        ];
        let (_dir, mut store) = store_with(&[
            (texts[0], "Alice", 1),
            (texts[1], "Alice", 2),
            (texts[2], "Alice", 3),
        ]);
        update_engrams(&mut store).unwrap();
        let style = store.style_vector("Alice").unwrap();

        // Direct recomputation from raw texts: the pinned formula,
        // including the final f32 rounding of the stored vector.
        let mut acc = vec![0.0f64; DIM];
        for t in &texts {
            for (a, x) in acc.iter_mut().zip(ngram_vector(t).iter()) {
                *a += f64::from(*x);
            }
        }
        for a in acc.iter_mut() {
            *a /= texts.len() as f64;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (a, b) in acc.iter().zip(style.iter()) {
            let direct = (a / norm) as f32;
            assert!((f64::from(direct) - f64::from(*b)).abs() < 1e-9);
        }
    }

    #[test]
    fn style_prior_separates_distinct_speakers() {
        let terse = [
            "gonna grab food rn",
            "lol k see ya",
            "nah im good",
            "brb gym time",
            "thats wild lmao",
        ];
        let formal = [
            "I would be delighted to attend the reception.",
            "Please find the revised agenda attached.",
            "Shall we reconvene on Thursday afternoon?",
            "The committee has approved the proposal.",
            "I appreciate your patience in this matter.",
        ];
        let mut rows = Vec::new();
        for (i, t) in terse.iter().enumerate() {
            rows.push((*t, "casual", i as i64));
        }
        for (i, t) in formal.iter().enumerate() {
            rows.push((*t, "Formal", 100 + i as i64));
        }
        let (_dir, mut store) = store_with(&rows);
        update_engrams(&mut store).unwrap();

        let mean = |entity: &str, texts: &[&str]| {
            texts
                .iter()
                .map(|t| style_score(&store, entity, t).unwrap())
                .sum::<f64>()
                / texts.len() as f64
        };
        assert!(mean("casual", &terse) > mean("casual", &formal));
        assert!(mean("Formal", &formal) > mean("Formal", &terse));
        for t in &terse {
            assert!(style_score(&store, "casual", t).unwrap() > 0.0);
        }
    }

    #[test]
    fn refresh_is_idempotent() {
        let (_dir, mut store) = store_with(&[
            ("I love hiking", "Alice", 1),
            ("the weather is mild", "Bob", 2),
        ]);
        update_engrams(&mut store).unwrap();
        let profiles_before = store.profiles().clone();
        let file_len = std::fs::metadata(store.path()).unwrap().len();
        update_engrams(&mut store).unwrap();
        assert_eq!(&profiles_before, store.profiles());
        assert_eq!(std::fs::metadata(store.path()).unwrap().len(), file_len);
    }

    #[test]
    fn case_insensitive_entity_lookup() {
        let (_dir, mut store) = store_with(&[("I love hiking", "Alice", 1)]);
        update_engrams(&mut store).unwrap();
        assert_eq!(find_entity(&store, "alice"), Some("Alice"));
        assert_eq!(find_entity(&store, "ALICE"), Some("Alice"));
        assert_eq!(find_entity(&store, "carol"), None);
    }
}
