use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use narravine_core::fsm::{parse_log, replay_log, EventKind, Phase, SessionState};
use narravine_core::scene::Scene;
use narravine_core::session::{replay_scene, SessionOutcome};
use narravine_core::store::{compute_metrics, load_session, FailureKind, Outcome, FSM_LOG, TRANSCRIPT_FILE};
use narravine_core::SessionConfig;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(name: &str, dir: Option<&Path>) -> (SessionConfig, SessionOutcome) {
    let cfg = SessionConfig::default();
    let scene = Scene::load(&fixture(name), cfg.perception.seed).unwrap();
    let mut effective = cfg.clone();
    scene.settings.apply(&mut effective);
    let out = replay_scene(&cfg, &scene, dir, None).unwrap();
    (effective, out)
}

/// Phases entered per trial, read off the transition list.
fn phases_by_trial(out: &SessionOutcome) -> BTreeMap<u32, Vec<Phase>> {
    let mut map: BTreeMap<u32, Vec<Phase>> = BTreeMap::new();
    for t in out.transitions.iter().filter(|t| t.rejected.is_none() && t.phase_to.trial_rank().is_some()) {
        let seq = map.entry(t.trial_index).or_default();
        if seq.last() != Some(&t.phase_to) {
            seq.push(t.phase_to);
        }
    }
    map
}

#[test]
fn happy_path_three_trials() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run("happy3.scene", Some(dir.path()));
    assert!(!out.aborted);
    assert_eq!(out.records.len(), 3);
    assert!(out.records.iter().all(|r| r.outcome == Outcome::Success));
    let expected = [Phase::IcubTurnOpen, Phase::HumanTurn, Phase::IcubTurnClose, Phase::WrapUp];
    let per_trial = phases_by_trial(&out);
    assert_eq!(per_trial.len(), 3);
    for (k, seq) in &per_trial {
        assert_eq!(seq, &expected, "trial {k}");
    }
    let intro = out.transitions.iter().filter(|t| t.phase_to == Phase::Introduction).count();
    assert_eq!(intro, 1);
    assert_eq!(out.transitions.last().unwrap().phase_to, Phase::Closure);
    for r in &out.records {
        assert_eq!(r.phases, expected);
        let steps: Vec<_> = r.transcript.turns.iter().map(|t| t.step()).collect();
        assert_eq!(steps.len(), 4);
    }
    let m = compute_metrics(&out.records).unwrap();
    assert_eq!(m.success_rate, 1.0);
    assert_eq!(m.vlm_agreement, 1.0);

    let files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(files.iter().filter(|f| f.ends_with(".rec")).count(), 3);
    assert!(files.contains(&FSM_LOG.to_string()));
    assert!(files.contains(&TRANSCRIPT_FILE.to_string()));
    let loaded = load_session(dir.path()).unwrap();
    assert_eq!(loaded.records, out.records);
    assert_eq!(compute_metrics(&loaded.records).unwrap(), m);
    assert_eq!(loaded.meta.unwrap().ended.unwrap().trials_recorded, 3);
}

#[test]
fn log_replays_to_the_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = run("happy3.scene", Some(dir.path()));
    let text = std::fs::read_to_string(dir.path().join(FSM_LOG)).unwrap();
    let records = parse_log(&text).unwrap();
    assert_eq!(records, out.transitions);
    let initial = SessionState::new(cfg.trials_total, cfg.participant_id.clone());
    let replayed = replay_log(initial, &records, &cfg.fsm_config()).unwrap();
    assert_eq!(replayed, out.final_state);
}

#[test]
fn mock_sessions_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("happy3.scene", Some(a.path()));
    run("happy3.scene", Some(b.path()));
    for file in [TRANSCRIPT_FILE, FSM_LOG, "trial_1.rec", "trial_3.rec", "genai.log"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

fn assert_single_failure(name: &str, kind: FailureKind) {
    let (cfg, out) = run(name, None);
    assert_eq!(out.records.len(), 1, "{name}");
    let r = &out.records[0];
    assert_eq!(r.outcome, Outcome::Failed, "{name}");
    assert_eq!(r.failure_kind, Some(kind), "{name}");
    assert_eq!(out.final_state.phase, Phase::Closure, "{name}");
    // One initial attempt plus the configured retries, then recovery.
    let failures = out
        .transitions
        .iter()
        .filter(|t| t.trial_index == 1 && matches!(t.event_kind, EventKind::Timeout | EventKind::ModuleFailure))
        .count();
    assert_eq!(failures as u32, cfg.retries.max + 1, "{name}");
    assert!(out.transitions.iter().any(|t| t.phase_to == Phase::FailureRecovery));
}

#[test]
fn misdetection_fails_the_trial() {
    assert_single_failure("fail_misdetect.scene", FailureKind::StickerDetection);
}

#[test]
fn silence_fails_the_trial() {
    assert_single_failure("fail_speech_timeout.scene", FailureKind::VoiceTimeout);
}

#[test]
fn narrator_outage_fails_the_trial() {
    assert_single_failure("fail_llm_outage.scene", FailureKind::LlmFailure);
}

#[test]
fn describer_outage_fails_the_trial() {
    assert_single_failure("fail_vlm_outage.scene", FailureKind::StickerDetection);
}

#[test]
fn repeated_drops_fail_the_trial() {
    assert_single_failure("fail_cube_drop.scene", FailureKind::CubeDrop);
}

#[test]
fn a_single_drop_is_recovered() {
    let (_, out) = run("recover_cube_drop.scene", None);
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].outcome, Outcome::Success);
    assert!(out
        .transitions
        .iter()
        .any(|t| t.event_kind == EventKind::ModuleFailure && t.phase_to == Phase::IcubTurnOpen));
}

#[test]
fn abort_during_second_trial() {
    let (_, out) = run("abort_trial2.scene", None);
    assert!(out.aborted);
    let outcomes: Vec<_> = out.records.iter().map(|r| r.outcome).collect();
    assert_eq!(outcomes, [Outcome::Success, Outcome::Aborted]);
    assert_eq!(out.records[1].trial_index, 2);
    assert_eq!(out.final_state.phase, Phase::Closure);
}

#[test]
fn trial_count_comes_from_config() {
    let mut cfg = SessionConfig::default();
    cfg.trials_total = 1;
    let scene = Scene::load(&fixture("happy3.scene"), 1).unwrap();
    let mut scene_one = scene.clone();
    scene_one.settings.trials_total = None;
    let out = replay_scene(&cfg, &scene_one, None, None).unwrap();
    assert_eq!(out.records.len(), 1);
}

