use std::collections::BTreeMap;

use metateach::analysis::extract_metrics;
use metateach::config::ExperimentConfig;
use metateach::feedback::{Modality, Mode};
use metateach::session::{run_scripted_session, RecordBody, SessionLog};
use metateach::teacher::TeacherConfig;
use metateach::Error;

fn config(trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.session.trials = trials;
    c
}

fn scripted(mode: Mode, seed: u64, trials: usize) -> SessionLog {
    run_scripted_session(mode, &TeacherConfig::default(), &config(trials), seed).unwrap()
}

fn noisy(mode: Mode, seed: u64, trials: usize) -> SessionLog {
    let teacher = TeacherConfig {
        noise_temperature: TeacherConfig::NOISY_TEMPERATURE,
        ..TeacherConfig::default()
    };
    run_scripted_session(mode, &teacher, &config(trials), seed).unwrap()
}

#[test]
fn same_seed_gives_identical_bytes() {
    for mode in [Mode::PreferenceOnly, Mode::FullModality] {
        assert_eq!(scripted(mode, 4, 12).to_jsonl(), scripted(mode, 4, 12).to_jsonl());
        assert_eq!(noisy(mode, 4, 12).to_jsonl(), noisy(mode, 4, 12).to_jsonl());
    }
}

#[test]
fn different_seeds_give_different_logs() {
    assert_ne!(scripted(Mode::FullModality, 1, 6).to_jsonl(), scripted(Mode::FullModality, 2, 6).to_jsonl());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let log = noisy(Mode::FullModality, 9, 10);
    log.write(&path).unwrap();
    let back = SessionLog::read(&path).unwrap();
    assert_eq!(back, log);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), log.to_jsonl());
    back.validate_finished().unwrap();
    back.verify_replay().unwrap();
}

#[test]
fn records_are_sequenced_and_bracketed() {
    let log = scripted(Mode::FullModality, 3, 8);
    for (i, r) in log.records.iter().enumerate() {
        assert_eq!(r.seq, i as u64);
    }
    assert_eq!(log.records.first().unwrap().body.kind(), "session_start");
    assert_eq!(log.records.last().unwrap().body.kind(), "summary");
    let kinds: Vec<_> = log.records.iter().map(|r| r.body.kind()).collect();
    let per_trial = ["pair_presented", "outcome", "feedback", "learner_snapshot"];
    for (t, chunk) in kinds[1..kinds.len() - 1].chunks(4).enumerate() {
        assert_eq!(chunk, per_trial, "trial {t}");
    }
    assert_eq!(log.header().unwrap().clock, "logical");
    assert!(log.records.iter().all(|r| r.timestamp == r.seq as f64));
}

#[test]
fn truncated_log_is_rejected_by_analysis() {
    let log = scripted(Mode::FullModality, 5, 6);
    let mut cut = log.clone();
    cut.records.truncate(cut.records.len() - 6);
    assert!(!cut.is_finished());
    assert!(matches!(extract_metrics(&cut), Err(Error::MalformedLog(_))));
    assert!(matches!(cut.validate_finished(), Err(Error::MalformedLog(_))));
    // Text cut mid-line fails to parse at all.
    let text = log.to_jsonl();
    let broken = &text[..text.len() - 20];
    assert!(matches!(SessionLog::from_jsonl(broken), Err(Error::MalformedLog(_))));
}

#[test]
fn tampered_snapshot_fails_replay() {
    let mut log = scripted(Mode::FullModality, 6, 6);
    let snap = log
        .records
        .iter_mut()
        .rev()
        .find_map(|r| match &mut r.body {
            RecordBody::LearnerSnapshot(s) => Some(s),
            _ => None,
        })
        .unwrap();
    snap.learner.dist.mean.0[0] += 1e-12;
    assert!(log.verify_replay().is_err());
}

#[test]
fn tampered_feedback_fails_replay() {
    let mut log = scripted(Mode::PreferenceOnly, 6, 6);
    let fb = log
        .records
        .iter_mut()
        .find_map(|r| match &mut r.body {
            RecordBody::Feedback(f) => Some(f),
            _ => None,
        })
        .unwrap();
    use metateach::feedback::Preference;
    fb.feedback.preference = match fb.feedback.preference {
        Preference::First => Preference::Second,
        _ => Preference::First,
    };
    assert!(log.verify_replay().is_err());
}

/// Counts meta events straight from the JSON text.
fn recount(log: &SessionLog) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for line in log.to_jsonl().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["record_kind"] != "feedback" {
            continue;
        }
        for e in v["payload"]["events"].as_array().unwrap() {
            let name = e["event"].as_str().unwrap();
            if name != "preference" {
                *counts.entry(name.to_string()).or_insert(0) += 1;
            }
        }
    }
    counts
}

#[test]
fn modality_counts_match_a_recount() {
    for seed in 0..6 {
        let log = noisy(Mode::FullModality, seed, 20);
        let m = extract_metrics(&log).unwrap();
        let raw = recount(&log);
        assert_eq!(m.modality_counts.values().sum::<usize>(), raw.values().sum::<usize>());
        let per_trial: usize = m.modality_per_trial.iter().flat_map(|t| t.values()).sum();
        assert_eq!(per_trial, raw.values().sum::<usize>());
        for (modality, event) in [
            (Modality::Guidance, "guidance_mark"),
            (Modality::Correction, "correction_mark"),
            (Modality::Speed, "speed_level"),
            (Modality::Exploration, "exploration_level"),
            (Modality::FallbackSave, "fallback_save"),
            (Modality::FallbackLoad, "fallback_load"),
            (Modality::Demonstration, "demonstration"),
        ] {
            assert_eq!(
                m.modality_counts.get(&modality).copied().unwrap_or(0),
                raw.get(event).copied().unwrap_or(0),
                "{event}"
            );
        }
    }
}

#[test]
fn preference_only_logs_have_no_meta_events() {
    for seed in 0..4 {
        let log = noisy(Mode::PreferenceOnly, seed, 15);
        assert!(recount(&log).is_empty());
        assert!(extract_metrics(&log).unwrap().modality_counts.values().all(|&c| c == 0));
    }
}

#[test]
fn metrics_agree_with_outcomes() {
    let log = scripted(Mode::FullModality, 0, 41);
    let m = extract_metrics(&log).unwrap();
    assert_eq!(m.trials, 41);
    assert_eq!(m.hits_per_trial.len(), 41);
    let hits: Vec<bool> = log
        .trials()
        .unwrap()
        .iter()
        .map(|t| t.outcomes.outcomes[0].hit || t.outcomes.outcomes[1].hit)
        .collect();
    assert_eq!(m.hits_per_trial, hits);
    assert_eq!(m.total_hits, hits.iter().filter(|&&h| h).count());
    assert_eq!(m.first_hit_trial, hits.iter().position(|&h| h).map(|i| i + 1));
    assert_eq!(m.censored_first_hit(), m.first_hit_trial.unwrap_or(42));
    let summary = log.summary().unwrap();
    assert_eq!(summary.hit_trials, m.total_hits);
    assert_eq!(summary.first_hit_trial, m.first_hit_trial);
}
