use serde::{Deserialize, Serialize};

/// Speech-act category of an event. Assigned by the caller or by the
/// salience classifier when the gate is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Commitment,
    Correction,
    Decision,
    Relationship,
    Question,
    Noise,
    Statement,
    Other,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Commitment => "commitment",
            Category::Correction => "correction",
            Category::Decision => "decision",
            Category::Relationship => "relationship",
            Category::Question => "question",
            Category::Noise => "noise",
            Category::Statement => "statement",
            Category::Other => "other",
        }
    }
}

/// What kind of row an event is: a verbatim conversational message, or a
/// batch artifact re-entered into the substrate so it is retrievable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Message,
    Summary,
    Profile,
    Timeline,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Message => "message",
            Modality::Summary => "summary",
            Modality::Profile => "profile",
            Modality::Timeline => "timeline",
        }
    }
}

/// The three ingestion-gate signals, each clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSignals {
    pub novelty: f64,
    pub salience: f64,
    pub prediction_error: f64,
}

/// One verbatim conversational event. `text` is byte-identical to what was
/// ingested; it is never rewritten by any later stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: u64,
    pub text: String,
    pub sender: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient: Option<String>,
    /// Seconds since epoch; non-negative.
    pub timestamp: i64,
    pub category: Category,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_tags: Option<GateSignals>,
}

/// Caller-supplied event fields before the store assigns an id.
///
/// This is also the JSON Lines ingest schema: `text` is required, all other
/// keys are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInput {
    pub text: String,
    #[serde(default)]
    pub sender: String,
    #[serde(default)]
    pub recipient: Option<String>,
    #[serde(default)]
    pub timestamp: i64,
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default)]
    pub modality: Option<Modality>,
}

impl EventInput {
    pub fn new(text: impl Into<String>) -> Self {
        EventInput {
            text: text.into(),
            sender: String::new(),
            recipient: None,
            timestamp: 0,
            category: None,
            modality: None,
        }
    }

    pub fn sender(mut self, sender: impl Into<String>) -> Self {
        self.sender = sender.into();
        self
    }

    pub fn recipient(mut self, recipient: impl Into<String>) -> Self {
        self.recipient = Some(recipient.into());
        self
    }

    pub fn timestamp(mut self, ts: i64) -> Self {
        self.timestamp = ts;
        self
    }

    pub fn category(mut self, category: Category) -> Self {
        self.category = Some(category);
        self
    }

    pub fn modality(mut self, modality: Modality) -> Self {
        self.modality = Some(modality);
        self
    }
}

/// A contiguous run of message events with no internal gap of 6 hours or
/// more. Episodes partition the message stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    pub start_ts: i64,
    pub end_ts: i64,
    pub event_ids: Vec<u64>,
}

/// Gap at or above which two consecutive messages fall into separate
/// episodes: six hours, in seconds.
pub const EPISODE_GAP_SECONDS: i64 = 21_600;
