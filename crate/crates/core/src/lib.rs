//! An embedded agent-memory engine.
//!
//! Conversational events are preserved verbatim in a single-file store
//! and served through a multi-stage retrieval pipeline: lexical (BM25)
//! and dense (exact cosine) candidate generation, weighted
//! reciprocal-rank fusion, conditional reweighting (temporal boost,
//! personality prior, salience drop, surprise boost), and reranking with
//! modality adjustment. Ingestion can be filtered through a three-signal
//! encoding gate (novelty, salience, prediction error); batch stages
//! derive summaries, contradiction records, fact timelines, surprise
//! scores, and per-speaker engrams from the substrate after the fact.
//!
//! Everything runs on commodity CPU with deterministic, pluggable model
//! interfaces; no network, database server, or pretrained weights.
//!
//! ```no_run
//! use truemem_core::engine::{Engine, EngineConfig};
//! use truemem_core::event::EventInput;
//!
//! let mut engine = Engine::open("memory.tm", EngineConfig::default())?;
//! engine.ingest(EventInput::new("Alice moved to Lisbon").sender("alice"))?;
//! let hits = engine.query("where does Alice live?", 10)?;
//! # let _ = hits;
//! # Ok::<(), truemem_core::error::Error>(())
//! ```

pub mod bench;
pub mod config;
pub mod consolidate;
pub mod dense;
pub mod embed;
pub mod engine;
pub mod engram;
pub mod error;
pub mod event;
pub mod fusion;
pub mod gate;
pub mod intent;
pub mod lexical;
pub mod predictive;
pub mod salience;
pub mod store;
pub mod text;

pub use embed::{Embedder, NgramHashEmbedder, TokenHashEmbedder};
pub use engine::{Engine, EngineConfig, IngestOutcome, ScoredEvent};
pub use error::{Error, Result};
pub use event::{Category, Episode, Event, EventInput, GateSignals, Modality};
pub use fusion::{Reranker, RerankerChoice};
pub use gate::GateConfig;
pub use store::Store;
