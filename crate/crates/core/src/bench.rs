//! Desk-scale evaluation harness: synthetic conversation corpora with
//! labeled relevance, recall@k / MRR metrics, a gate-signal sweep scored
//! by AUC, and an embedder x reranker grid runner.
//!
//! Everything is deterministic from an explicit seed; outputs are stable
//! across runs and platforms. External corpora in the same JSON schema
//! can be plugged into `eval_retrieval` in place of generated ones.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::engine::{Engine, EngineConfig};
use crate::error::Result;
use crate::event::{EventInput, GateSignals};
use crate::fusion::RerankerChoice;
use crate::gate::{gate_score, novelty, prediction_error, GateConfig};
use crate::salience::{hybrid_salience, SalienceConfig};
use crate::store::Store;

/// SplitMix64: tiny, seedable, identical on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, bound).
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound.max(1)
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}

/// One labeled retrieval query: the text and the ids of the events that
/// answer it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchQuery {
    pub query: String,
    pub relevant: Vec<u64>,
}

/// A generated corpus. Ids in `queries[*].relevant` are the 1-based
/// positions events receive when ingested in order with the gate off.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub seed: u64,
    pub events: Vec<EventInput>,
    pub queries: Vec<BenchQuery>,
    /// Number of sessions planted via 6h+ timestamp gaps.
    pub planted_sessions: usize,
}

const SPEAKERS: [&str; 8] = [
    "Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi",
];

const PLACE_ADJECTIVES: [&str; 10] = [
    "harbor",
    "ridge",
    "hilltop",
    "riverside",
    "sunset",
    "granite",
    "willow",
    "maple",
    "cedar",
    "dune",
];

const PLACE_NOUNS: [&str; 10] = [
    "gym", "library", "garage", "studio", "cafe", "office", "depot", "annex", "arcade", "atrium",
];

const NEEDLE_OBJECTS: [&str; 8] = [
    "locker code",
    "wifi password",
    "gate pin",
    "door code",
    "parking spot",
    "booking reference",
    "invoice number",
    "shelf mark",
];

const FILLER_TOPICS: [&str; 12] = [
    "sailing",
    "gardening",
    "chess",
    "pottery",
    "cycling",
    "birdwatching",
    "baking",
    "astronomy",
    "climbing",
    "swimming",
    "painting",
    "jogging",
];

const NOISE_LINES: [&str; 6] = ["ok", "lol", "sounds good", "yep", "thanks", "nice"];

const CITIES: [&str; 8] = [
    "Lisbon", "Porto", "Madrid", "Oslo", "Vienna", "Prague", "Dublin", "Ghent",
];

fn value_token(rng: &mut SplitMix64) -> String {
    const ALPHABET: &[u8] = b"abcdefghjkmnpqrstuvwxyz23456789";
    let mut out = String::with_capacity(6);
    for _ in 0..6 {
        out.push(ALPHABET[rng.below(ALPHABET.len() as u64) as usize] as char);
    }
    out
}

/// Generates a multi-speaker, multi-session corpus with planted needle
/// facts, noise, and contradicting updates. Byte-identical regeneration
/// from the same seed.
pub fn generate_corpus(seed: u64, n_events: usize, n_queries: usize) -> SyntheticCorpus {
    assert!(n_events >= 1 && n_queries >= 1);
    let mut rng = SplitMix64::new(seed);

    // Distinct (place, object) pairs so each needle is unambiguous.
    let mut slots: Vec<(String, String)> = Vec::new();
    for adj in PLACE_ADJECTIVES {
        for noun in PLACE_NOUNS {
            slots.push((format!("{adj} {noun}"), String::new()));
        }
    }
    let n_queries = n_queries.min(slots.len()).min(n_events);
    // Fisher-Yates over the slot pool.
    for i in (1..slots.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        slots.swap(i, j);
    }

    // Needle positions spread through the stream.
    let mut needle_positions: Vec<usize> = Vec::new();
    let stride = (n_events / n_queries).max(1);
    for q in 0..n_queries {
        needle_positions.push((q * stride + (stride / 2).min(n_events - 1)).min(n_events - 1));
    }

    let mut events = Vec::with_capacity(n_events);
    let mut queries = Vec::with_capacity(n_queries);
    let mut planted_sessions = 1usize;
    let mut ts = 1_700_000_000i64;
    let mut needle_idx = 0usize;
    let mut mover: Option<(String, String)> = None;

    for position in 0..n_events {
        // Session boundary roughly every 25 events.
        if position > 0 && position % 25 == 0 {
            ts += 7 * 3600 + rng.below(3 * 3600) as i64;
            planted_sessions += 1;
        } else if position > 0 {
            ts += 60 + rng.below(540) as i64;
        }
        let sender = rng.pick(&SPEAKERS).to_string();
        let recipient = rng.pick(&SPEAKERS).to_string();

        let is_needle =
            needle_idx < needle_positions.len() && position == needle_positions[needle_idx];
        let text = if is_needle {
            let (place, _) = &slots[needle_idx];
            let object = NEEDLE_OBJECTS[needle_idx % NEEDLE_OBJECTS.len()];
            let value = value_token(&mut rng);
            queries.push(BenchQuery {
                query: format!("what is the {place} {object}?"),
                relevant: vec![position as u64 + 1],
            });
            needle_idx += 1;
            format!("heads up, the {place} {object} is {value}")
        } else {
            match rng.below(10) {
                0..=2 => rng.pick(&NOISE_LINES).to_string(),
                3 => {
                    // Contradicting update pairs about where someone lives.
                    if let Some((who, _old)) = mover.take() {
                        let new_city = rng.pick(&CITIES).to_string();
                        format!("actually, {who} moved to {new_city}")
                    } else {
                        let who = rng.pick(&SPEAKERS).to_string();
                        let city = rng.pick(&CITIES).to_string();
                        mover = Some((who.clone(), city.clone()));
                        format!("{who} moved to {city}")
                    }
                }
                4 => format!("I love {}", rng.pick(&FILLER_TOPICS)),
                _ => {
                    let topic = rng.pick(&FILLER_TOPICS);
                    let day = 1 + rng.below(28);
                    match rng.below(3) {
                        0 => format!("we talked about {topic} for a while after lunch"),
                        1 => format!("planning the {topic} meetup for March {day}"),
                        _ => format!("the {topic} session went longer than expected"),
                    }
                }
            }
        };
        events.push(
            EventInput::new(text)
                .sender(sender)
                .recipient(recipient)
                .timestamp(ts),
        );
    }

    SyntheticCorpus {
        seed,
        events,
        queries,
        planted_sessions,
    }
}

/// Retrieval quality over a corpus already ingested into `engine`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub recall_at_k: f64,
    pub mrr: f64,
}

pub fn eval_retrieval(engine: &Engine, corpus: &SyntheticCorpus, k: usize) -> Result<Metrics> {
    let mut recall_sum = 0.0;
    let mut mrr_sum = 0.0;
    for q in &corpus.queries {
        let results = engine.query(&q.query, k)?;
        let retrieved: Vec<u64> = results.iter().map(|r| r.event_id).collect();
        let hit = q
            .relevant
            .iter()
            .filter(|id| retrieved.contains(id))
            .count();
        recall_sum += hit as f64 / q.relevant.len() as f64;
        let first = retrieved.iter().position(|id| q.relevant.contains(id));
        mrr_sum += first.map_or(0.0, |rank| 1.0 / (rank + 1) as f64);
    }
    let n = corpus.queries.len().max(1) as f64;
    Ok(Metrics {
        recall_at_k: recall_sum / n,
        mrr: mrr_sum / n,
    })
}

/// Ingests a corpus into a fresh engine at `store_path` with the gate off.
pub fn ingest_corpus(
    store_path: &Path,
    corpus: &SyntheticCorpus,
    embedder: Arc<dyn Embedder>,
    reranker: RerankerChoice,
) -> Result<Engine> {
    if store_path.exists() {
        std::fs::remove_file(store_path)?;
    }
    let config = EngineConfig {
        embedder,
        gate: GateConfig::disabled(),
        reranker,
        ..EngineConfig::default()
    };
    let mut engine = Engine::open(store_path, config)?;
    for input in &corpus.events {
        engine.ingest(input.clone())?;
    }
    engine.sync()?;
    Ok(engine)
}

// ── AUC ─────────────────────────────────────────────────────────────

/// Rank-sum (Mann-Whitney) AUC with average ranks for ties. None when the
/// labels are degenerate (all one class).
pub fn auc_rank_sum(scored: &[(f64, bool)]) -> Option<f64> {
    let positives = scored.iter().filter(|(_, keep)| *keep).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_of = vec![0.0f64; scored.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            j += 1;
        }
        // Ranks are 1-based; tied items share the average rank.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            rank_of[idx] = avg;
        }
        i = j;
    }
    let rank_sum: f64 = scored
        .iter()
        .zip(&rank_of)
        .filter(|((_, keep), _)| *keep)
        .map(|(_, r)| r)
        .sum();
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Brute-force all-pairs AUC; the oracle `auc_rank_sum` must match.
pub fn auc_all_pairs(scored: &[(f64, bool)]) -> Option<f64> {
    let pos: Vec<f64> = scored.iter().filter(|(_, k)| *k).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scored
        .iter()
        .filter(|(_, k)| !*k)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for p in &pos {
        for n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(total / (pos.len() * neg.len()) as f64)
}

// ── Gate sweep ──────────────────────────────────────────────────────

/// One event with a keep/discard label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledEvent {
    #[serde(flatten)]
    pub input: EventInput,
    pub keep: bool,
}

/// Gate quality at one config point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub lambda_n: f64,
    pub lambda_s: f64,
    pub lambda_pi: f64,
    pub tau: f64,
    /// None when the labels are degenerate.
    pub auc: Option<f64>,
}

/// Signals for every message in the stream, computed once against an
/// admit-all prefix store; each grid point then recombines them.
pub fn stream_signals(
    work_dir: &Path,
    labeled: &[LabeledEvent],
    embedder: Arc<dyn Embedder>,
) -> Result<Vec<GateSignals>> {
    let path = work_dir.join("sweep-signals.tm");
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    let mut store = Store::open(&path, embedder)?;
    let gate_cfg = GateConfig::default();
    let salience_cfg = SalienceConfig::default();
    let mut signals = Vec::with_capacity(labeled.len());
    for item in labeled {
        signals.push(GateSignals {
            novelty: novelty(&store, &item.input.text, &gate_cfg),
            salience: hybrid_salience(&item.input.text, &salience_cfg).value,
            prediction_error: prediction_error(&store, &item.input.text, &gate_cfg, &salience_cfg),
        });
        store.append_event(item.input.clone())?;
    }
    Ok(signals)
}

/// Scores the labeled stream under every config in the grid and reports
/// AUC per config.
pub fn sweep_gate(
    work_dir: &Path,
    labeled: &[LabeledEvent],
    grid: &[GateConfig],
    embedder: Arc<dyn Embedder>,
) -> Result<Vec<SweepResult>> {
    let signals = stream_signals(work_dir, labeled, embedder)?;
    let mut results = Vec::with_capacity(grid.len());
    for cfg in grid {
        let scored: Vec<(f64, bool)> = signals
            .iter()
            .zip(labeled)
            .map(|(s, item)| (gate_score(s, cfg), item.keep))
            .collect();
        results.push(SweepResult {
            lambda_n: cfg.lambda_novelty,
            lambda_s: cfg.lambda_salience,
            lambda_pi: cfg.lambda_prediction,
            tau: cfg.tau.unwrap_or(0.30),
            auc: auc_rank_sum(&scored),
        });
    }
    Ok(results)
}

/// The default sweep grid: every weight combination over a small lattice
/// at the default threshold.
pub fn default_gate_grid() -> Vec<GateConfig> {
    let lattice = [0.15, 0.25, 0.35];
    let mut grid = Vec::new();
    for &ln in &lattice {
        for &ls in &lattice {
            for &lp in &lattice {
                grid.push(GateConfig {
                    lambda_novelty: ln,
                    lambda_salience: ls,
                    lambda_prediction: lp,
                    ..GateConfig::default()
                });
            }
        }
    }
    grid
}

/// A separably-labeled stream: informative fact messages (keep) against
/// short noise (discard).
pub fn generate_labeled_stream(seed: u64, n: usize) -> Vec<LabeledEvent> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let keep = i % 2 == 0;
        let input = if keep {
            let topic = rng.pick(&FILLER_TOPICS);
            let place = rng.pick(&PLACE_ADJECTIVES);
            let day = 1 + rng.below(28);
            EventInput::new(format!(
                "the {topic} group booked the {place} hall for March {day} at {}pm, confirmation {}",
                1 + rng.below(11),
                value_token(&mut rng),
            ))
        } else {
            EventInput::new(rng.pick(&NOISE_LINES).to_string())
        }
        .sender(rng.pick(&SPEAKERS).to_string())
        .timestamp(1_700_000_000 + i as i64 * 120);
        out.push(LabeledEvent { input, keep });
    }
    out
}

// ── Ablation grid ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub embedder: String,
    pub reranker: String,
    pub recall_at_k: f64,
    pub mrr: f64,
}

/// Runs the full embedder x reranker cross product over one corpus, each
/// cell on its own fresh store file under `work_dir`.
pub fn run_grid(
    work_dir: &Path,
    corpus: &SyntheticCorpus,
    embedders: &[Arc<dyn Embedder>],
    rerankers: &[RerankerChoice],
    k: usize,
) -> Result<Vec<GridCell>> {
    let mut cells = Vec::with_capacity(embedders.len() * rerankers.len());
    for embedder in embedders {
        for reranker in rerankers {
            let path = work_dir.join(format!("grid-{}-{}.tm", embedder.name(), reranker.name()));
            let engine = ingest_corpus(&path, corpus, embedder.clone(), reranker.clone())?;
            let metrics = eval_retrieval(&engine, corpus, k)?;
            cells.push(GridCell {
                embedder: embedder.name().to_string(),
                reranker: reranker.name().to_string(),
                recall_at_k: metrics.recall_at_k,
                mrr: metrics.mrr,
            });
        }
    }
    Ok(cells)
}

/// CSV rendering of grid cells: `embedder,reranker,recall_at_k,mrr`.
pub fn grid_to_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("embedder,reranker,recall_at_k,mrr\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            c.embedder, c.reranker, c.recall_at_k, c.mrr
        ));
    }
    out
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let margin = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - margin).max(0.0), (center + margin).min(1.0))
}
