//! Rule-based query-intent detection: temporal intent with an optional
//! timestamp window, personality intent, question type, and the focal
//! entity. Reference time for relative expressions is the newest stored
//! timestamp, not the wall clock, so queries are reproducible.

use serde::Serialize;

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Detail,
    Synthesis,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryIntent {
    pub temporal: bool,
    pub personality: bool,
    pub question_type: QuestionType,
    /// Present only when the query pins a concrete interval; implies
    /// `temporal`.
    pub time_window: Option<(i64, i64)>,
    pub focal_entity: Option<String>,
}

#[derive(Debug, Clone)]
pub struct IntentConfig {
    pub personality_markers: Vec<String>,
    pub detail_markers: Vec<String>,
    pub synthesis_markers: Vec<String>,
    /// (phrase, lookback seconds) for relative time expressions.
    pub relative_windows: Vec<(String, i64)>,
}

impl Default for IntentConfig {
    fn default() -> Self {
        fn list(items: &[&str]) -> Vec<String> {
            items.iter().map(|s| s.to_string()).collect()
        }
        const DAY: i64 = 86_400;
        IntentConfig {
            personality_markers: list(&[
                "like",
                "likes",
                "liked",
                "love",
                "loves",
                "prefer",
                "prefers",
                "favorite",
                "favourite",
                "personality",
                "style",
                "hate",
                "hates",
                "enjoy",
                "enjoys",
                "who is",
            ]),
            detail_markers: list(&[
                "what date",
                "which day",
                "what day",
                "what time",
                "how many",
                "how much",
            ]),
            synthesis_markers: list(&[
                "summarize",
                "summarise",
                "summary",
                "overall",
                "in general",
                "recap",
            ]),
            relative_windows: vec![
                ("yesterday".into(), 2 * DAY),
                ("last week".into(), 7 * DAY),
                ("this week".into(), 7 * DAY),
                ("last month".into(), 31 * DAY),
                ("this month".into(), 31 * DAY),
                ("last year".into(), 366 * DAY),
            ],
        }
    }
}

const ENTITY_STOPWORDS: [&str; 24] = [
    "i", "what", "when", "where", "who", "whom", "whose", "why", "how", "which", "is", "are", "do",
    "does", "did", "can", "could", "will", "would", "should", "the", "a", "an", "please",
];

fn focal_entity(query: &str) -> Option<String> {
    let words = text::words(query);
    for (i, word) in words.iter().enumerate() {
        if !text::starts_uppercase(word) {
            continue;
        }
        let lower = word.to_lowercase();
        if ENTITY_STOPWORDS.contains(&lower.as_str())
            || text::is_month_word(&lower)
            || text::is_weekday_word(&lower)
        {
            continue;
        }
        // Sentence-initial capitalization only counts for words that are
        // not ordinary sentence leads; mid-query capitals always count.
        if i == 0 && words.len() > 1 && !text::starts_uppercase(&words[1]) {
            // Heuristic: a capitalized first word followed by lowercase
            // text is often just the sentence lead; accept it only if it
            // never appears lowercased elsewhere in the query.
            let reappears_lower = words[1..].iter().any(|w| w.to_lowercase() == lower);
            if reappears_lower {
                continue;
            }
        }
        let stripped = word
            .strip_suffix("'s")
            .or_else(|| word.strip_suffix("\u{2019}s"))
            .unwrap_or(word);
        return Some(stripped.to_string());
    }
    None
}

/// Detects intent for one query. `now` anchors relative time expressions;
/// pass the newest stored timestamp.
pub fn detect_intent(query: &str, now: i64, cfg: &IntentConfig) -> QueryIntent {
    let lower = query.to_lowercase();
    let tokens = text::tokenize(&lower);
    let leads_with_when = tokens.first().is_some_and(|t| t == "when");

    let mut time_window = None;
    for (phrase, lookback) in &cfg.relative_windows {
        if text::contains_phrase(&lower, phrase) {
            time_window = Some(((now - lookback).max(0), now));
            break;
        }
    }
    let temporal = leads_with_when || time_window.is_some() || text::contains_date(query);

    let personality = cfg
        .personality_markers
        .iter()
        .any(|m| text::contains_phrase(&lower, m));

    let question_type = if leads_with_when
        || cfg
            .detail_markers
            .iter()
            .any(|m| text::contains_phrase(&lower, m))
    {
        QuestionType::Detail
    } else if cfg
        .synthesis_markers
        .iter()
        .any(|m| text::contains_phrase(&lower, m))
    {
        QuestionType::Synthesis
    } else {
        QuestionType::General
    };

    QueryIntent {
        temporal,
        personality,
        question_type,
        time_window,
        focal_entity: focal_entity(query),
    }
}
