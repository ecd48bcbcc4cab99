//! Message salience scoring.
//!
//! Two scorers behind one hybrid entry point. Short messages (50 chars or
//! fewer) go through a rule-based speech-act classifier that returns a
//! fixed score per category, so their salience does not depend on length.
//! Longer messages are scored by an additive feature scorer over length,
//! numbers, dates, and emotional markers. Both paths are pure functions.

use crate::event::Category;
use crate::text;

/// Character-count boundary between the rule path and the feature path.
pub const ROUTE_BOUNDARY_CHARS: usize = 50;

/// A salience value in [0, 1] plus the speech-act category the classifier
/// assigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalienceScore {
    pub value: f64,
    pub category: Category,
}

/// Lexicons and weights for both scorers. All fields can be overridden
/// from the `[salience]` config section.
#[derive(Debug, Clone)]
pub struct SalienceConfig {
    pub noise_words: Vec<String>,
    pub commitment_markers: Vec<String>,
    pub correction_markers: Vec<String>,
    pub decision_markers: Vec<String>,
    pub relationship_words: Vec<String>,
    pub emotion_words: Vec<String>,
    pub interrogative_leads: Vec<String>,
    /// Fixed rule-path scores per category, indexed by [`Category`].
    pub category_scores: CategoryScores,
    pub base_weight: f64,
    pub length_weight: f64,
    pub per_number_weight: f64,
    pub number_cap: f64,
    pub date_bonus: f64,
    pub emotion_bonus: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CategoryScores {
    pub commitment: f64,
    pub correction: f64,
    pub decision: f64,
    pub relationship: f64,
    pub question: f64,
    pub noise: f64,
    pub statement: f64,
    pub other: f64,
}

impl CategoryScores {
    pub fn get(&self, category: Category) -> f64 {
        match category {
            Category::Commitment => self.commitment,
            Category::Correction => self.correction,
            Category::Decision => self.decision,
            Category::Relationship => self.relationship,
            Category::Question => self.question,
            Category::Noise => self.noise,
            Category::Statement => self.statement,
            Category::Other => self.other,
        }
    }
}

impl Default for SalienceConfig {
    fn default() -> Self {
        fn list(items: &[&str]) -> Vec<String> {
            items.iter().map(|s| s.to_string()).collect()
        }
        SalienceConfig {
            noise_words: list(&[
                "ok", "okay", "k", "kk", "lol", "haha", "heh", "thanks", "thx", "ty", "yes", "yep",
                "yeah", "no", "nope", "sure", "cool", "nice", "great", "fine", "hm", "hmm",
                "right", "done", "bye", "hi", "hello", "hey", "np", "welcome", "good", "sounds",
            ]),
            commitment_markers: list(&[
                "will",
                "going to",
                "promise",
                "promised",
                "i ll",
                "gonna",
                "commit to",
            ]),
            correction_markers: list(&[
                "actually",
                "i meant",
                "no i meant",
                "correction",
                "my mistake",
                "i was wrong",
                "to clarify",
            ]),
            decision_markers: list(&[
                "let s",
                "we decided",
                "decided",
                "decision",
                "we agreed",
                "agreed to",
                "settled on",
            ]),
            relationship_words: list(&[
                "mother",
                "father",
                "mom",
                "dad",
                "sister",
                "brother",
                "wife",
                "husband",
                "girlfriend",
                "boyfriend",
                "partner",
                "cousin",
                "aunt",
                "uncle",
                "grandma",
                "grandpa",
                "daughter",
                "son",
                "fiance",
                "fiancee",
                "in laws",
            ]),
            emotion_words: list(&[
                "love",
                "hate",
                "excited",
                "thrilled",
                "amazing",
                "wonderful",
                "terrible",
                "awful",
                "happy",
                "sad",
                "worried",
                "anxious",
                "angry",
                "furious",
                "scared",
                "afraid",
                "sorry",
                "upset",
                "frustrated",
                "delighted",
                "proud",
                "devastated",
            ]),
            interrogative_leads: list(&[
                "what", "when", "where", "who", "whom", "whose", "why", "how", "which", "is",
                "are", "do", "does", "did", "can", "could", "will", "would", "should",
            ]),
            category_scores: CategoryScores {
                commitment: 0.8,
                correction: 0.6,
                decision: 0.7,
                relationship: 0.6,
                question: 0.2,
                noise: 0.02,
                statement: 0.3,
                other: 0.3,
            },
            base_weight: 0.25,
            length_weight: 0.2,
            per_number_weight: 0.1,
            number_cap: 0.2,
            date_bonus: 0.15,
            emotion_bonus: 0.1,
        }
    }
}

/// Rule-based speech-act classification with a fixed score per category.
/// Rules apply in order: question, commitment, correction, noise,
/// decision, relationship, then statement as the fallback.
pub fn classify_speech_act(text_in: &str, cfg: &SalienceConfig) -> (Category, f64) {
    let trimmed = text_in.trim();
    let lower = trimmed.to_lowercase();
    let tokens = text::tokenize(&lower);

    let category = if trimmed.ends_with('?')
        || tokens
            .first()
            .is_some_and(|t| cfg.interrogative_leads.iter().any(|w| w == t))
    {
        Category::Question
    } else if cfg
        .commitment_markers
        .iter()
        .any(|m| text::contains_phrase(&lower, m))
    {
        Category::Commitment
    } else if cfg
        .correction_markers
        .iter()
        .any(|m| text::contains_phrase(&lower, m))
    {
        Category::Correction
    } else if !tokens.is_empty()
        && tokens
            .iter()
            .all(|t| cfg.noise_words.iter().any(|w| w == t))
    {
        Category::Noise
    } else if cfg
        .decision_markers
        .iter()
        .any(|m| text::contains_phrase(&lower, m))
    {
        Category::Decision
    } else if cfg
        .relationship_words
        .iter()
        .any(|m| text::contains_phrase(&lower, m))
    {
        Category::Relationship
    } else {
        Category::Statement
    };
    (category, cfg.category_scores.get(category))
}

/// Additive feature scorer for longer messages: base weight, a length
/// term saturating at 200 chars, per-number bonuses with a cap, a date
/// bonus, and an emotional-marker bonus, clamped to [0, 1]. Empty text
/// scores 0.
pub fn compute_message_salience(text_in: &str, cfg: &SalienceConfig) -> SalienceScore {
    let (category, _) = classify_speech_act(text_in, cfg);
    if text_in.is_empty() {
        return SalienceScore {
            value: 0.0,
            category,
        };
    }
    let chars = text_in.chars().count() as f64;
    let mut value = cfg.base_weight + cfg.length_weight * (chars / 200.0).min(1.0);
    let numbers = text::numeric_tokens(text_in).len() as f64;
    value += (cfg.per_number_weight * numbers).min(cfg.number_cap);
    if text::contains_date(text_in) {
        value += cfg.date_bonus;
    }
    let lower = text_in.to_lowercase();
    if text_in.contains('!')
        || cfg
            .emotion_words
            .iter()
            .any(|w| text::contains_phrase(&lower, w))
    {
        value += cfg.emotion_bonus;
    }
    SalienceScore {
        value: value.clamp(0.0, 1.0),
        category,
    }
}

/// Routes on message length: 50 characters or fewer take the rule path,
/// longer messages take the feature path. The classified category is
/// reported either way.
pub fn hybrid_salience(text_in: &str, cfg: &SalienceConfig) -> SalienceScore {
    if text_in.chars().count() <= ROUTE_BOUNDARY_CHARS {
        let (category, value) = classify_speech_act(text_in, cfg);
        SalienceScore { value, category }
    } else {
        compute_message_salience(text_in, cfg)
    }
}
