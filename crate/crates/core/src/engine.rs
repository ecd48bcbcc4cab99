//! Orchestration: the stage-ordered ingestion and query pipelines.
//!
//! Ingestion runs the gate and appends admitted events with their signal
//! tags. Queries run intent detection, lexical and dense candidate
//! generation (plus the separation list when the corpus is busy enough),
//! weighted RRF fusion, conditional reweighting, truncation to the
//! pre-rerank window, and reranking. Batch processing runs consolidation,
//! the surprise index, and engram refresh, in that order.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::consolidate::{consolidate, ConsolidatorConfig, Summarizer, Window};
use crate::embed::{l2_normalize, Embedder, NgramHashEmbedder, DIM};
use crate::engram::update_engrams;
use crate::error::{Error, Result};
use crate::event::{Event, EventInput, GateSignals};
use crate::fusion::{
    rerank, reweight, rrf_fuse, Candidate, FusionConfig, IdentityReranker, IdfOverlapReranker,
    RerankerChoice,
};
use crate::gate::{gate_decide, GateConfig};
use crate::intent::{detect_intent, IntentConfig, QueryIntent};
use crate::predictive::{build_surprise_index, PredictiveConfig};
use crate::salience::SalienceConfig;
use crate::store::Store;

/// Hypothetical-document query expansion hook. The default engine has no
/// expander, which leaves the query embedding untouched.
pub trait QueryExpander: Send + Sync {
    fn expand(&self, query: &str) -> Vec<String>;
}

/// Everything configurable about an engine instance.
#[derive(Clone)]
pub struct EngineConfig {
    pub embedder: Arc<dyn Embedder>,
    pub gate: GateConfig,
    pub salience: SalienceConfig,
    pub predictive: PredictiveConfig,
    pub fusion: FusionConfig,
    pub intent: IntentConfig,
    pub consolidator: ConsolidatorConfig,
    pub reranker: RerankerChoice,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            embedder: Arc::new(NgramHashEmbedder::new()),
            gate: GateConfig::default(),
            salience: SalienceConfig::default(),
            predictive: PredictiveConfig::default(),
            fusion: FusionConfig::default(),
            intent: IntentConfig::default(),
            consolidator: ConsolidatorConfig::default(),
            reranker: RerankerChoice::Default,
        }
    }
}

impl std::fmt::Debug for EngineConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EngineConfig")
            .field("embedder", &self.embedder.name())
            .field("gate", &self.gate)
            .field("reranker", &self.reranker.name())
            .finish_non_exhaustive()
    }
}

/// What happened to one ingested event.
#[derive(Debug, Clone)]
pub enum IngestOutcome {
    Admitted(Event),
    Rejected(GateSignals),
}

impl IngestOutcome {
    pub fn admitted(&self) -> bool {
        matches!(self, IngestOutcome::Admitted(_))
    }
}

/// One query result row.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredEvent {
    pub event_id: u64,
    pub text: String,
    pub score: f64,
    pub modality: crate::event::Modality,
    pub timestamp: i64,
}

/// Candidate counts through one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageTrace {
    pub stage: &'static str,
    pub candidates_in: usize,
    pub candidates_out: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BatchReport {
    pub summaries: usize,
    pub contradictions: usize,
    pub timeline_assertions: usize,
    pub surprise_scored: usize,
    pub entities_refreshed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub events: usize,
    pub messages: usize,
    pub summaries: usize,
    pub episodes: usize,
    pub entities: usize,
    pub surprise_scored: usize,
    pub contradictions: usize,
    pub timeline_assertions: usize,
    pub distinct_senders: usize,
    pub schema_version: u32,
    pub embedder: String,
}

/// The embedded memory engine: one store, one configuration, and the
/// full ingest/query/batch surface.
pub struct Engine {
    store: Store,
    config: EngineConfig,
    expander: Option<Arc<dyn QueryExpander>>,
    summarizer: Option<Arc<dyn Summarizer>>,
}

impl Engine {
    pub fn open(path: impl AsRef<Path>, config: EngineConfig) -> Result<Engine> {
        config.gate.validate()?;
        let store = Store::open(path, config.embedder.clone())?;
        Ok(Engine {
            store,
            config,
            expander: None,
            summarizer: None,
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_expander(&mut self, expander: Arc<dyn QueryExpander>) {
        self.expander = Some(expander);
    }

    pub fn set_summarizer(&mut self, summarizer: Arc<dyn Summarizer>) {
        self.summarizer = Some(summarizer);
    }

    /// Newest message timestamp; anchors relative time expressions.
    fn reference_time(&self) -> i64 {
        self.store
            .messages()
            .map(|e| e.timestamp)
            .max()
            .unwrap_or(0)
    }

    /// Gate + append. On admit, the event is stored with its signal tags
    /// and the classifier's category; on reject, nothing is stored and
    /// the signals are returned.
    pub fn ingest(&mut self, input: EventInput) -> Result<IngestOutcome> {
        let decision = gate_decide(
            &self.store,
            &input,
            &self.config.gate,
            &self.config.salience,
        );
        if !decision.admit {
            return Ok(IngestOutcome::Rejected(
                decision.signals.expect("reject implies an enabled gate"),
            ));
        }
        let mut input = input;
        if let Some(category) = decision.category {
            input.category = Some(category);
        }
        let event = self.store.append_event_tagged(input, decision.signals)?;
        Ok(IngestOutcome::Admitted(event))
    }

    pub fn detect_intent(&self, query: &str) -> QueryIntent {
        detect_intent(query, self.reference_time(), &self.config.intent)
    }

    /// Query embedding, folding in any expander output: the normalized
    /// mean of the query's and the hypothetical documents' embeddings.
    /// Without an expander this is exactly the query embedding.
    fn query_vector(&self, query: &str) -> Vec<f32> {
        let embedder = self.store.embedder();
        let expansions = self
            .expander
            .as_ref()
            .map(|e| e.expand(query))
            .unwrap_or_default();
        if expansions.is_empty() {
            return embedder.embed(query);
        }
        let mut acc = vec![0.0f64; DIM];
        for text in std::iter::once(query.to_string()).chain(expansions) {
            for (a, x) in acc.iter_mut().zip(embedder.embed(&text)) {
                *a += f64::from(x);
            }
        }
        let mut v: Vec<f32> = acc.into_iter().map(|x| x as f32).collect();
        l2_normalize(&mut v);
        v
    }

    pub fn query(&self, query: &str, k: usize) -> Result<Vec<ScoredEvent>> {
        Ok(self.query_traced(query, k)?.0)
    }

    /// The query pipeline with per-stage candidate counts.
    pub fn query_traced(
        &self,
        query: &str,
        k: usize,
    ) -> Result<(Vec<ScoredEvent>, Vec<StageTrace>)> {
        let cfg = &self.config.fusion;
        if k > cfg.final_k {
            return Err(Error::KTooLarge {
                requested: k,
                final_k: cfg.final_k,
            });
        }
        let mut trace = Vec::new();
        if self.store.event_count() == 0 {
            return Ok((Vec::new(), trace));
        }

        let intent = self.detect_intent(query);

        let lexical_hits = self.store.search_lexical(query, cfg.prerank_window);
        trace.push(StageTrace {
            stage: "lexical",
            candidates_in: 0,
            candidates_out: lexical_hits.len(),
        });

        let dense_hits = self
            .store
            .search_dense_vec(&self.query_vector(query), cfg.prerank_window);
        trace.push(StageTrace {
            stage: "dense",
            candidates_in: 0,
            candidates_out: dense_hits.len(),
        });

        let senders = self.store.distinct_senders();
        let sep_hits = if senders > cfg.sep_min_senders {
            intent.focal_entity.as_ref().map(|entity| {
                self.store
                    .search_lexical(&format!("{entity} {entity} {query}"), cfg.prerank_window)
            })
        } else {
            None
        };
        trace.push(StageTrace {
            stage: "separation",
            candidates_in: 0,
            candidates_out: sep_hits.as_ref().map_or(0, Vec::len),
        });

        let fuse_in = lexical_hits.len() + dense_hits.len() + sep_hits.as_ref().map_or(0, Vec::len);
        let fused = rrf_fuse(
            &lexical_hits,
            &dense_hits,
            sep_hits.as_deref(),
            senders,
            cfg,
        );
        trace.push(StageTrace {
            stage: "fuse",
            candidates_in: fuse_in,
            candidates_out: fused.len(),
        });

        let reweight_in = fused.len();
        let reweighted = reweight(&self.store, fused, &intent, cfg, &self.config.salience);
        trace.push(StageTrace {
            stage: "reweight",
            candidates_in: reweight_in,
            candidates_out: reweighted.len(),
        });

        let truncate_in = reweighted.len();
        let mut window = reweighted;
        window.truncate(cfg.prerank_window);
        trace.push(StageTrace {
            stage: "truncate",
            candidates_in: truncate_in,
            candidates_out: window.len(),
        });

        let rerank_in = window.len();
        let ranked: Vec<Candidate> = match &self.config.reranker {
            RerankerChoice::None => {
                let mut w = window;
                w.truncate(cfg.final_k);
                w
            }
            RerankerChoice::Default => {
                let reranker = IdfOverlapReranker::for_query(&self.store, query);
                rerank(query, window, &reranker, intent.question_type, cfg)
            }
            RerankerChoice::Identity => {
                rerank(query, window, &IdentityReranker, intent.question_type, cfg)
            }
            RerankerChoice::External(reranker) => {
                rerank(query, window, reranker.as_ref(), intent.question_type, cfg)
            }
        };
        trace.push(StageTrace {
            stage: "rerank",
            candidates_in: rerank_in,
            candidates_out: ranked.len(),
        });

        let results = ranked
            .into_iter()
            .take(k)
            .map(|c| ScoredEvent {
                event_id: c.event_id,
                text: c.text,
                score: c.score,
                modality: c.modality,
                timestamp: c.timestamp,
            })
            .collect();
        Ok((results, trace))
    }

    /// Batch stages in pipeline order: consolidation, surprise index,
    /// engram refresh.
    pub fn run_batch(&mut self) -> Result<BatchReport> {
        let report = consolidate(
            &mut self.store,
            Window::Default,
            &self.config.consolidator,
            &self.config.salience,
            self.summarizer.as_deref(),
        )?;
        let surprise_scored = build_surprise_index(&mut self.store, &self.config.predictive)?;
        let entities_refreshed = update_engrams(&mut self.store)?;
        self.store.sync()?;
        Ok(BatchReport {
            summaries: report.summaries.len(),
            contradictions: report.contradictions.len(),
            timeline_assertions: report.timeline_deltas.len(),
            surprise_scored,
            entities_refreshed,
        })
    }

    /// Consolidation alone, over an explicit window.
    pub fn consolidate_window(
        &mut self,
        window: Window,
    ) -> Result<crate::consolidate::ConsolidateReport> {
        let report = consolidate(
            &mut self.store,
            window,
            &self.config.consolidator,
            &self.config.salience,
            self.summarizer.as_deref(),
        )?;
        self.store.sync()?;
        Ok(report)
    }

    pub fn build_surprise(&mut self) -> Result<usize> {
        let n = build_surprise_index(&mut self.store, &self.config.predictive)?;
        self.store.sync()?;
        Ok(n)
    }

    pub fn update_engrams(&mut self) -> Result<usize> {
        let n = update_engrams(&mut self.store)?;
        self.store.sync()?;
        Ok(n)
    }

    pub fn stats(&self) -> Stats {
        Stats {
            events: self.store.event_count(),
            messages: self.store.message_count(),
            summaries: self.store.summaries().len(),
            episodes: self.store.rebuild_episodes().len(),
            entities: self.store.profiles().len(),
            surprise_scored: self.store.surprise_count(),
            contradictions: self.store.contradictions().len(),
            timeline_assertions: self.store.assertion_count(),
            distinct_senders: self.store.distinct_senders(),
            schema_version: self.store.schema_version(),
            embedder: self.store.embedder_identity().to_string(),
        }
    }

    pub fn sync(&mut self) -> Result<()> {
        self.store.sync()
    }
}
