//! End-to-end pipeline behavior across ingest, batch, query, and
//! persistence.

use tempfile::tempdir;

use truemem_core::config::apply_config_text;
use truemem_core::engine::{Engine, EngineConfig, IngestOutcome};
use truemem_core::event::{EventInput, Modality};
use truemem_core::fusion::RerankerChoice;
use truemem_core::gate::GateConfig;

fn disabled_gate_engine(path: &std::path::Path) -> Engine {
    let config = EngineConfig {
        gate: GateConfig::disabled(),
        ..EngineConfig::default()
    };
    Engine::open(path, config).unwrap()
}

#[test]
fn gated_stream_keeps_substance_drops_noise() {
    let dir = tempdir().unwrap();
    let mut engine = Engine::open(dir.path().join("gated.tm"), EngineConfig::default()).unwrap();

    let stream = [
        (
            "the June 2 wedding venue deposit is 540 and due Friday",
            true,
        ),
        ("ok", false),
        ("lol", false),
        ("I will book the riverside hall tomorrow morning", true),
        ("thanks", false),
    ];
    for (text, should_store) in stream {
        let outcome = engine.ingest(EventInput::new(text).sender("a")).unwrap();
        assert_eq!(outcome.admitted(), should_store, "text {text:?}");
    }
    assert_eq!(engine.store().event_count(), 2);
    for event in engine.store().events() {
        assert!(
            event.signal_tags.is_some(),
            "gated events carry signal tags"
        );
    }
}

#[test]
fn surprise_boost_shows_through_identity_reranker() {
    let dir = tempdir().unwrap();
    let config = EngineConfig {
        gate: GateConfig::disabled(),
        reranker: RerankerChoice::Identity,
        ..EngineConfig::default()
    };
    let mut engine = Engine::open(dir.path().join("boost.tm"), config).unwrap();
    // Two equally-matching docs; the second one carries novel facts and a
    // date, so its surprise score is higher.
    engine
        .ingest(
            EventInput::new("the depot audit plan")
                .sender("a")
                .timestamp(100),
        )
        .unwrap();
    engine
        .ingest(
            EventInput::new("the depot audit plan covers March 3, rooms 401 and 17")
                .sender("b")
                .timestamp(200),
        )
        .unwrap();

    let before = engine.query("depot audit plan", 10).unwrap();
    // Build only the surprise index so the candidate pool stays fixed.
    engine.build_surprise().unwrap();
    let after = engine.query("depot audit plan", 10).unwrap();

    let sigma1 = engine.store().surprise_score(1).unwrap();
    let sigma2 = engine.store().surprise_score(2).unwrap();
    assert!(
        sigma2 > sigma1,
        "facts and dates raise surprise: {sigma2} vs {sigma1}"
    );

    let score_of = |results: &[truemem_core::ScoredEvent], id: u64| {
        results.iter().find(|r| r.event_id == id).map(|r| r.score)
    };
    // Event 2's score gains (1 + alpha * sigma) relative to its pre-batch run.
    let gain2 = score_of(&after, 2).unwrap() / score_of(&before, 2).unwrap();
    assert!((gain2 - (1.0 + 0.2 * sigma2)).abs() < 1e-9);
}

#[test]
fn modality_fusion_reorders_summary_results_by_question_type() {
    let dir = tempdir().unwrap();
    let mut engine = disabled_gate_engine(&dir.path().join("modality.tm"));
    let text = "the harvest festival planning for October 12";
    engine
        .ingest(EventInput::new(text).sender("a").timestamp(1))
        .unwrap();
    engine
        .ingest(
            EventInput::new(text)
                .sender("a")
                .timestamp(2)
                .modality(Modality::Summary),
        )
        .unwrap();

    // Detail question: the message outranks the equal-text summary.
    let detail = engine
        .query("when is the harvest festival planning?", 10)
        .unwrap();
    let detail_ids: Vec<u64> = detail.iter().map(|r| r.event_id).collect();
    assert_eq!(detail_ids, vec![1, 2]);

    // Synthesis question: the summary gains the boost and leads.
    let synth = engine
        .query("summarize the harvest festival planning", 10)
        .unwrap();
    let synth_ids: Vec<u64> = synth.iter().map(|r| r.event_id).collect();
    assert_eq!(synth_ids[0], 2);
}

#[test]
fn engine_recovers_from_torn_append() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("torn.tm");
    {
        let mut engine = disabled_gate_engine(&path);
        engine
            .ingest(EventInput::new("kept message one").sender("a").timestamp(1))
            .unwrap();
        engine
            .ingest(EventInput::new("kept message two").sender("a").timestamp(2))
            .unwrap();
        engine
            .ingest(
                EventInput::new("torn away message")
                    .sender("a")
                    .timestamp(3),
            )
            .unwrap();
    }
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();

    let mut engine = disabled_gate_engine(&path);
    assert_eq!(engine.store().event_count(), 2);
    engine
        .ingest(
            EventInput::new("appended after recovery")
                .sender("a")
                .timestamp(4),
        )
        .unwrap();
    let results = engine.query("appended after recovery", 10).unwrap();
    assert_eq!(results[0].event_id, 3);
}

#[test]
fn concurrent_readers_see_identical_results() {
    let dir = tempdir().unwrap();
    let mut engine = disabled_gate_engine(&dir.path().join("conc.tm"));
    for i in 0..50 {
        engine
            .ingest(
                EventInput::new(format!(
                    "note {i} about the {} rota",
                    ["gym", "cafe"][i % 2]
                ))
                .sender("a")
                .timestamp(i as i64),
            )
            .unwrap();
    }
    let engine = &engine;
    let baseline = engine.query("cafe rota", 10).unwrap();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4)
            .map(|_| {
                scope.spawn(move || {
                    engine
                        .query("cafe rota", 10)
                        .unwrap()
                        .iter()
                        .map(|r| (r.event_id, r.score.to_bits()))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            let got = handle.join().unwrap();
            let want: Vec<(u64, u64)> = baseline
                .iter()
                .map(|r| (r.event_id, r.score.to_bits()))
                .collect();
            assert_eq!(got, want);
        }
    });
}

#[test]
fn config_file_drives_engine_behavior() {
    let dir = tempdir().unwrap();
    let mut config = EngineConfig::default();
    apply_config_text(
        &mut config,
        "reranker = identity\n\
         [gate]\n\
         tau = disabled\n\
         [fusion]\n\
         final_k = 3\n",
    )
    .unwrap();
    let mut engine = Engine::open(dir.path().join("cfg.tm"), config).unwrap();
    // Disabled gate admits noise.
    assert!(engine
        .ingest(EventInput::new("ok").sender("a"))
        .unwrap()
        .admitted());
    for i in 0..5 {
        engine
            .ingest(EventInput::new(format!("shared token row {i}")).sender("a"))
            .unwrap();
    }
    // final_k now caps k.
    assert!(engine.query("shared token", 4).is_err());
    assert_eq!(engine.query("shared token", 3).unwrap().len(), 3);
}

#[test]
fn stats_reflect_store_contents() {
    let dir = tempdir().unwrap();
    let mut engine = disabled_gate_engine(&dir.path().join("stats.tm"));
    let base = 1_700_000_000i64;
    engine
        .ingest(
            EventInput::new("Alice lives in Lisbon")
                .sender("Alice")
                .timestamp(base),
        )
        .unwrap();
    engine
        .ingest(
            EventInput::new("Alice moved to Porto")
                .sender("Alice")
                .timestamp(base + 60),
        )
        .unwrap();
    engine
        .ingest(
            EventInput::new("I love hiking these days")
                .sender("Bob")
                .timestamp(base + 30_000),
        )
        .unwrap();
    engine.run_batch().unwrap();

    let stats = engine.stats();
    assert_eq!(stats.messages, 3);
    assert_eq!(stats.episodes, 2);
    assert_eq!(stats.entities, 2);
    assert_eq!(stats.distinct_senders, 2);
    assert_eq!(stats.surprise_scored, 3);
    assert!(stats.summaries >= 1);
    assert!(stats.contradictions >= 1);
    assert_eq!(stats.events, stats.messages + stats.summaries);
    assert_eq!(stats.embedder, "default-hash-256");
}

#[test]
fn rejected_events_leave_no_trace() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("reject.tm");
    let mut engine = Engine::open(&path, EngineConfig::default()).unwrap();
    engine
        .ingest(EventInput::new("the launch review happens March 3 in room 401").sender("a"))
        .unwrap();
    engine.sync().unwrap();
    let before = std::fs::read(&path).unwrap();
    let outcome = engine.ingest(EventInput::new("ok").sender("a")).unwrap();
    assert!(matches!(outcome, IngestOutcome::Rejected(_)));
    engine.sync().unwrap();
    let after = std::fs::read(&path).unwrap();
    assert_eq!(before, after, "a rejected event must write nothing");
}

#[test]
fn engine_handles_are_send() {
    fn assert_send<T: Send>() {}
    fn assert_sync<T: Sync>() {}
    assert_send::<Engine>();
    assert_sync::<Engine>(); // read-only sharing across reader threads
}
