//! Flat sectioned key-value configuration files.
//!
//! ```text
//! # comment
//! embedder = default-hash-256
//! reranker = default
//!
//! [gate]
//! lambda_n = 0.25
//! tau = disabled
//!
//! [salience]
//! noise_words = ok,k,lol
//! ```
//!
//! Values before any section header configure the engine itself. List
//! values are comma-separated. Unknown keys are errors so typos surface
//! instead of silently using defaults. After the file applies, the
//! `TRUEMEMORY_ALPHA_SURPRISE` environment variable overrides the
//! surprise boost weight.

use crate::embed::builtin_embedder;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::event::Category;
use crate::fusion::RerankerChoice;

/// Environment variable overriding `[fusion] alpha_surprise`.
pub const ALPHA_SURPRISE_ENV: &str = "TRUEMEMORY_ALPHA_SURPRISE";

fn parse_err(line: usize, detail: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        detail: detail.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: expected an integer, got {value:?}")))
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn category_for(line: usize, name: &str) -> Result<Category> {
    match name {
        "commitment" => Ok(Category::Commitment),
        "correction" => Ok(Category::Correction),
        "decision" => Ok(Category::Decision),
        "relationship" => Ok(Category::Relationship),
        "question" => Ok(Category::Question),
        "noise" => Ok(Category::Noise),
        "statement" => Ok(Category::Statement),
        "other" => Ok(Category::Other),
        _ => Err(parse_err(line, format!("unknown category {name:?}"))),
    }
}

/// Applies a config file's contents on top of `config`, then the
/// environment override.
pub fn apply_config_text(config: &mut EngineConfig, text: &str) -> Result<()> {
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(
                line_no,
                format!("expected key = value, got {line:?}"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        apply_key(config, &section, key, value, line_no)?;
    }
    apply_env(config)?;
    Ok(())
}

/// Applies only the environment override; used when no config file is
/// given.
pub fn apply_env(config: &mut EngineConfig) -> Result<()> {
    if let Ok(raw) = std::env::var(ALPHA_SURPRISE_ENV) {
        let value = raw.trim().parse::<f64>().map_err(|_| {
            parse_err(
                0,
                format!("{ALPHA_SURPRISE_ENV}: expected a number, got {raw:?}"),
            )
        })?;
        config.fusion.alpha_surprise = value;
    }
    Ok(())
}

fn apply_key(
    config: &mut EngineConfig,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<()> {
    match section {
        "" => match key {
            "embedder" => {
                config.embedder = builtin_embedder(value).ok_or_else(|| {
                    parse_err(line, format!("unknown embedder {value:?}; external embedders are supplied through the library API"))
                })?;
            }
            "reranker" => {
                config.reranker = RerankerChoice::from_name(value)
                    .ok_or_else(|| parse_err(line, format!("unknown reranker {value:?}")))?;
            }
            _ => return Err(parse_err(line, format!("unknown top-level key {key:?}"))),
        },
        "gate" => {
            let g = &mut config.gate;
            match key {
                "lambda_n" => g.lambda_novelty = parse_f64(line, key, value)?,
                "lambda_s" => g.lambda_salience = parse_f64(line, key, value)?,
                "lambda_pi" => g.lambda_prediction = parse_f64(line, key, value)?,
                "tau" => {
                    g.tau = if value.eq_ignore_ascii_case("disabled") {
                        None
                    } else {
                        Some(parse_f64(line, key, value)?)
                    }
                }
                "salience_floor" => g.salience_floor = parse_f64(line, key, value)?,
                "neighbor_count" => g.neighbor_count = parse_usize(line, key, value)?,
                "relevance_cutoff" => g.relevance_cutoff = parse_f64(line, key, value)?,
                _ => {
                    if let Some(name) = key.strip_prefix("offset_") {
                        let category = category_for(line, name)?;
                        g.category_offsets
                            .insert(category, parse_f64(line, key, value)?);
                    } else {
                        return Err(parse_err(line, format!("unknown [gate] key {key:?}")));
                    }
                }
            }
        }
        "salience" => {
            let s = &mut config.salience;
            match key {
                "noise_words" => s.noise_words = parse_list(value),
                "commitment_markers" => s.commitment_markers = parse_list(value),
                "correction_markers" => s.correction_markers = parse_list(value),
                "decision_markers" => s.decision_markers = parse_list(value),
                "relationship_words" => s.relationship_words = parse_list(value),
                "emotion_words" => s.emotion_words = parse_list(value),
                "interrogative_leads" => s.interrogative_leads = parse_list(value),
                "base_weight" => s.base_weight = parse_f64(line, key, value)?,
                "length_weight" => s.length_weight = parse_f64(line, key, value)?,
                "per_number_weight" => s.per_number_weight = parse_f64(line, key, value)?,
                "number_cap" => s.number_cap = parse_f64(line, key, value)?,
                "date_bonus" => s.date_bonus = parse_f64(line, key, value)?,
                "emotion_bonus" => s.emotion_bonus = parse_f64(line, key, value)?,
                "score_commitment" => s.category_scores.commitment = parse_f64(line, key, value)?,
                "score_correction" => s.category_scores.correction = parse_f64(line, key, value)?,
                "score_decision" => s.category_scores.decision = parse_f64(line, key, value)?,
                "score_relationship" => {
                    s.category_scores.relationship = parse_f64(line, key, value)?
                }
                "score_question" => s.category_scores.question = parse_f64(line, key, value)?,
                "score_noise" => s.category_scores.noise = parse_f64(line, key, value)?,
                "score_statement" => s.category_scores.statement = parse_f64(line, key, value)?,
                "score_other" => s.category_scores.other = parse_f64(line, key, value)?,
                _ => return Err(parse_err(line, format!("unknown [salience] key {key:?}"))),
            }
        }
        "fusion" => {
            let f = &mut config.fusion;
            match key {
                "k_rrf" => f.k_rrf = parse_f64(line, key, value)?,
                "w_fts" => f.w_fts = parse_f64(line, key, value)?,
                "w_vec" => f.w_vec = parse_f64(line, key, value)?,
                "w_sep_factor" => f.w_sep_factor = parse_f64(line, key, value)?,
                "sep_min_senders" => f.sep_min_senders = parse_usize(line, key, value)?,
                "alpha_surprise" => f.alpha_surprise = parse_f64(line, key, value)?,
                "temporal_boost" => f.temporal_boost = parse_f64(line, key, value)?,
                "profile_inject_factor" => f.profile_inject_factor = parse_f64(line, key, value)?,
                "style_inject_factor" => f.style_inject_factor = parse_f64(line, key, value)?,
                "min_salience" => f.min_salience = parse_f64(line, key, value)?,
                "modality_detail_penalty" => {
                    f.modality_detail_penalty = parse_f64(line, key, value)?
                }
                "modality_synthesis_boost" => {
                    f.modality_synthesis_boost = parse_f64(line, key, value)?
                }
                "prerank_window" => f.prerank_window = parse_usize(line, key, value)?,
                "final_k" => f.final_k = parse_usize(line, key, value)?,
                "profile_inject_limit" => f.profile_inject_limit = parse_usize(line, key, value)?,
                "style_inject_limit" => f.style_inject_limit = parse_usize(line, key, value)?,
                _ => return Err(parse_err(line, format!("unknown [fusion] key {key:?}"))),
            }
        }
        "predictive" => {
            let p = &mut config.predictive;
            match key {
                "w_novel" => p.novel_weight = parse_f64(line, key, value)?,
                "b_len" => p.length_bonus = parse_f64(line, key, value)?,
                "b_detail" => p.detail_bonus = parse_f64(line, key, value)?,
                "b_event" => p.event_bonus = parse_f64(line, key, value)?,
                "b_contra" => p.contradiction_bonus = parse_f64(line, key, value)?,
                "len_threshold" => p.length_threshold = parse_usize(line, key, value)?,
                "detail_threshold" => p.detail_threshold = parse_usize(line, key, value)?,
                "update_verbs" => p.update_verbs = parse_list(value),
                "event_keywords" => p.event_keywords = parse_list(value),
                _ => return Err(parse_err(line, format!("unknown [predictive] key {key:?}"))),
            }
        }
        "intent" => {
            let i = &mut config.intent;
            match key {
                "personality_markers" => i.personality_markers = parse_list(value),
                "detail_markers" => i.detail_markers = parse_list(value),
                "synthesis_markers" => i.synthesis_markers = parse_list(value),
                _ => return Err(parse_err(line, format!("unknown [intent] key {key:?}"))),
            }
        }
        "consolidator" => {
            let c = &mut config.consolidator;
            match key {
                "window_episodes" => c.window_episodes = parse_usize(line, key, value)?,
                "window_events" => c.window_events = parse_usize(line, key, value)?,
                "summary_sentences" => c.summary_sentences = parse_usize(line, key, value)?,
                _ => {
                    return Err(parse_err(
                        line,
                        format!("unknown [consolidator] key {key:?}"),
                    ))
                }
            }
        }
        other => return Err(parse_err(line, format!("unknown section [{other}]"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let mut config = EngineConfig::default();
        apply_config_text(
            &mut config,
            "# a comment\n\
             embedder = token-hash-256\n\
             reranker = identity\n\
             [gate]\n\
             lambda_n = 0.4\n\
             tau = 0.25\n\
             offset_correction = -0.1\n\
             [fusion]\n\
             alpha_surprise = 0.5\n\
             final_k = 7\n\
             [salience]\n\
             noise_words = ok, meh\n",
        )
        .unwrap();
        assert_eq!(config.embedder.name(), "token-hash-256");
        assert_eq!(config.reranker.name(), "identity");
        assert_eq!(config.gate.lambda_novelty, 0.4);
        assert_eq!(config.gate.tau, Some(0.25));
        assert_eq!(config.gate.offset(Category::Correction), -0.1);
        assert_eq!(config.fusion.alpha_surprise, 0.5);
        assert_eq!(config.fusion.final_k, 7);
        assert_eq!(
            config.salience.noise_words,
            vec!["ok".to_string(), "meh".to_string()]
        );
    }

    #[test]
    fn tau_disabled_keyword() {
        let mut config = EngineConfig::default();
        apply_config_text(&mut config, "[gate]\ntau = disabled\n").unwrap();
        assert_eq!(config.gate.tau, None);
    }

    #[test]
    fn unknown_keys_error_with_line_numbers() {
        let mut config = EngineConfig::default();
        let err = apply_config_text(&mut config, "[gate]\nbogus = 1\n").unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = apply_config_text(&mut config, "loose line without equals\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 1, .. }));
    }

    #[test]
    fn env_var_overrides_alpha() {
        // Env access is process-global; run both checks in one test to
        // avoid racing parallel tests.
        let mut config = EngineConfig::default();
        std::env::set_var(ALPHA_SURPRISE_ENV, "0.35");
        apply_config_text(&mut config, "[fusion]\nalpha_surprise = 0.9\n").unwrap();
        assert_eq!(config.fusion.alpha_surprise, 0.35);
        std::env::remove_var(ALPHA_SURPRISE_ENV);
        let mut config2 = EngineConfig::default();
        apply_config_text(&mut config2, "[fusion]\nalpha_surprise = 0.9\n").unwrap();
        assert_eq!(config2.fusion.alpha_surprise, 0.9);
    }
}
