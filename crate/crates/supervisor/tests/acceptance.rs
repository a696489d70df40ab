//! Acceptance run: one PASS/FAIL line per criterion, each under a 60 s
//! watchdog. Exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use narravine_core::fsm::{EventKind, Phase};
use narravine_core::genai::{
    CubeRef, Endpoint, Exchange, GenAiClient, GenAiError, MockEndpoint, MockFixture, MockReply, MockTransport,
    PromptConfig, Role, StickerDescription, Then, DESCRIBER_SYSTEM_PROMPT, NARRATOR_SYSTEM_PROMPT,
};
use narravine_core::perception::{
    classify_mutual_gaze, enroll_partner, recognize_partner, BBox, CubeObservation, CubePresentation, FaceDetection,
    FaceFrame, FaceSynth, GazeModel, GazeSynth, ObjectDetector, PerceptionError, GAZE_FEATURES,
};
use narravine_core::scene::Scene;
use narravine_core::session::replay_scene;
use narravine_core::store::{compute_metrics, Annotations, FailureKind, Outcome, TrialRecord, GENAI_LOG};
use narravine_core::{SessionConfig, StickerId, StoryStep, StoryTranscript};
use narravine_portnet::frame::{decode, encode_message};
use narravine_portnet::{Frame, MessageKind, Node, PortMessage, Registry};
use narravine_questionnaires::special::chi_square_sf;
use narravine_questionnaires::tables::parse_ueq_csv;
use narravine_questionnaires::{
    chi_square_gof, holm_adjust, score_sus, score_ueq, BenchmarkCategory, BenchmarkTable, CategoricalVotes, Expected,
    ScaleMap, SusResponse, UeqResponse, UeqScale,
};
use narravine_supervisor::hub::{Hub, StartRequest};
use narravine_supervisor::modules::Modules;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

const WATCHDOG: Duration = Duration::from_secs(60);

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture readable")
}

// 1 ------------------------------------------------------------------------

fn happy_path() -> Verdict {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_narravine"))
        .arg("replay")
        .arg(fixture("happy3.scene"))
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    let mut expected = vec!["Introduction"];
    for _ in 0..3 {
        expected.extend(["IcubTurnOpen", "HumanTurn", "IcubTurnClose", "WrapUp"]);
    }
    expected.push("Closure");
    let phases: Vec<&str> = summary["phases"].as_array().unwrap().iter().map(|p| p.as_str().unwrap()).collect();
    ensure!(phases == expected, "phase sequence {phases:?}");
    let trials = summary["trials"].as_array().unwrap();
    ensure!(trials.len() == 3, "{} trials", trials.len());
    ensure!(trials.iter().all(|t| t["outcome"] == "success"), "outcomes {trials:?}");
    ensure!(summary["metrics"]["success_rate"] == 1.0, "success_rate {}", summary["metrics"]["success_rate"]);
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("3 trials, success_rate 1.0, {} ms", elapsed.as_millis()))
}

// 2 ------------------------------------------------------------------------

fn failure_injection() -> Verdict {
    let cases = [
        ("fail_misdetect.scene", FailureKind::StickerDetection),
        ("fail_speech_timeout.scene", FailureKind::VoiceTimeout),
        ("fail_llm_outage.scene", FailureKind::LlmFailure),
        ("fail_vlm_outage.scene", FailureKind::StickerDetection),
        ("fail_cube_drop.scene", FailureKind::CubeDrop),
    ];
    let base = SessionConfig::default();
    for (name, kind) in cases {
        let scene = Scene::load(&fixture(name), base.perception.seed).map_err(|e| e.to_string())?;
        let mut cfg = base.clone();
        scene.settings.apply(&mut cfg);
        let out = replay_scene(&base, &scene, None, None).map_err(|e| format!("{name}: {e}"))?;
        ensure!(out.records.len() == 1, "{name}: {} records", out.records.len());
        let r = &out.records[0];
        ensure!(r.outcome == Outcome::Failed && r.failure_kind == Some(kind), "{name}: {:?} {:?}", r.outcome, r.failure_kind);
        let attempts = out
            .transitions
            .iter()
            .filter(|t| t.trial_index == 1 && matches!(t.event_kind, EventKind::Timeout | EventKind::ModuleFailure))
            .count() as u32;
        ensure!(attempts == cfg.retries.max + 1, "{name}: {attempts} failed attempts, retry bound {}", cfg.retries.max);
        ensure!(out.final_state.phase == Phase::Closure, "{name}: ended in {}", out.final_state.phase);
    }

    // A live session nobody answers still runs down to Closure.
    let mut cfg = SessionConfig {
        trials_total: 2,
        ..SessionConfig::default()
    };
    cfg.speech.time_scale = 0.001;
    let modules = Modules::boot("127.0.0.1", None).map_err(|e| e.to_string())?;
    let hub = Hub::new(cfg.clone(), Some(modules)).map_err(|e| e.to_string())?;
    hub.start(&StartRequest::default()).map_err(|e| e.to_string())?;
    ensure!(hub.wait_idle(Some(Duration::from_secs(45))), "unattended live session did not finish");
    let s = hub.snapshot();
    let summary = s.summary.ok_or("no summary")?;
    ensure!(s.state.phase == Phase::Closure, "live session ended in {}", s.state.phase);
    ensure!(summary.trials.len() == 2, "live session recorded {} trials", summary.trials.len());
    ensure!(
        summary.trials.iter().all(|t| t.outcome == Outcome::Failed && t.failure_kind == Some(FailureKind::Other)),
        "live session outcomes {:?}",
        summary.trials
    );
    Ok(format!("{} injected failures plus an unattended live session", cases.len()))
}

// 3 ------------------------------------------------------------------------

const STICKERS: [&str; 9] = [
    "castle", "mushroom-house", "island", "alien", "koala", "dragon", "rocket", "balloon", "lantern",
];

fn random_record(rng: &mut ChaCha8Rng, index: u32) -> TrialRecord {
    let outcome = [Outcome::Success, Outcome::Failed, Outcome::Aborted][rng.random_range(0..3)];
    let cubes = if outcome == Outcome::Success { 3 } else { rng.random_range(0..=3) };
    let cube_sequence: Vec<StickerId> =
        (0..cubes).map(|_| StickerId::new(STICKERS[rng.random_range(0..9)]).unwrap()).collect();
    let described = rng.random_range(0..=cube_sequence.len());
    let vlm_descriptions = cube_sequence[..described]
        .iter()
        .map(|s| {
            let own = s.as_str().rsplit('-').next().unwrap().to_string();
            let noun = match rng.random_range(0..4) {
                0 => own.clone(),
                1 => format!("{}S", own.to_uppercase()),
                2 => format!("{own}!"),
                _ => ["toy", "tree", "houses", "shape"][rng.random_range(0..4)].to_string(),
            };
            StickerDescription {
                word_count: 3,
                text: format!("A tiny {noun}"),
                source_cube: s.clone(),
                latency_ms: 0,
            }
        })
        .collect();
    TrialRecord {
        trial_index: index,
        cube_sequence,
        observations: Vec::new(),
        vlm_descriptions,
        transcript: StoryTranscript::new(),
        outcome,
        failure_kind: (outcome == Outcome::Failed).then(|| FailureKind::ALL[rng.random_range(0..5)]),
        annotations: Annotations {
            llm_added_elements: rng.random_bool(0.5),
            llm_fixed_human: rng.random_bool(0.3),
        },
        phases: Vec::new(),
        started_at: 0,
        ended_at: 1,
    }
}

fn metrics_oracle() -> Verdict {
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=30);
        let records: Vec<TrialRecord> = (1..=n).map(|i| random_record(&mut rng, i)).collect();
        let m = compute_metrics(&records).map_err(|e| e.to_string())?;

        let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let success = count(&|r| r.outcome == Outcome::Success);
        let failed = count(&|r| r.outcome == Outcome::Failed);
        let aborted = count(&|r| r.outcome == Outcome::Aborted);
        let added = count(&|r| r.annotations.llm_added_elements);
        let fixed = count(&|r| r.annotations.llm_fixed_human);
        let mut failures: BTreeMap<FailureKind, usize> = BTreeMap::new();
        for r in &records {
            if let Some(k) = r.failure_kind {
                *failures.entry(k).or_default() += 1;
            }
        }
        let descriptions: Vec<&StickerDescription> = records.iter().flat_map(|r| &r.vlm_descriptions).collect();
        let agreeing = descriptions
            .iter()
            .filter(|d| {
                let noun = d.source_cube.as_str().rsplit('-').next().unwrap();
                d.text.split_whitespace().any(|t| {
                    let w: String = t.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
                    w == noun || w == format!("{noun}s") || w == format!("{noun}es")
                })
            })
            .count();
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let ok = m.records == records.len()
            && (m.successes, m.failed, m.aborted) == (success, failed, aborted)
            && (m.llm_added, m.llm_fixed) == (added, fixed)
            && (m.descriptions, m.agreeing_descriptions) == (descriptions.len(), agreeing)
            && m.failures == failures
            && m.success_rate == rate(success, records.len())
            && m.llm_addition_rate == rate(added, records.len())
            && m.llm_fix_rate == rate(fixed, records.len())
            && m.vlm_agreement == rate(agreeing, descriptions.len());
        ensure!(ok, "seed {seed}: {m:?}");
    }
    Ok("200 record sets match the recount".into())
}

// 4 ------------------------------------------------------------------------

fn sus() -> Verdict {
    let sus = |items: &[i64]| SusResponse::new(items).map(|r| score_sus(&r)).map_err(|e| e.to_string());
    let best: Vec<i64> = (0..10).map(|i| if i % 2 == 0 { 5 } else { 1 }).collect();
    ensure!(sus(&best)? == 100.0, "odd=5 even=1 scored {}", sus(&best)?);
    ensure!(sus(&[3; 10])? == 50.0, "all 3 scored {}", sus(&[3; 10])?);

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1_000 {
        let items: Vec<i64> = (0..10).map(|_| rng.random_range(1..=5)).collect();
        let score = sus(&items)?;
        let oracle: i64 = items.iter().enumerate().map(|(i, &v)| if i % 2 == 0 { v - 1 } else { 5 - v }).sum();
        ensure!((0.0..=100.0).contains(&score), "{items:?} scored {score}");
        ensure!(score == oracle as f64 * 2.5, "{items:?} scored {score}");
        for i in 0..10 {
            if items[i] < 5 {
                let mut up = items.clone();
                up[i] += 1;
                let delta = sus(&up)? - score;
                let want = if i % 2 == 0 { 2.5 } else { -2.5 };
                ensure!(delta == want, "raising item {} of {items:?} moved the score by {delta}", i + 1);
            }
        }
    }
    Ok("bounds, reference points and per-item direction over 1000 responses".into())
}

// 5 ------------------------------------------------------------------------

fn ueq() -> Verdict {
    let map = ScaleMap::standard();
    let neutral = UeqResponse::new(&[4; 26]).map_err(|e| e.to_string())?;
    let scores = score_ueq(&[neutral], &map).map_err(|e| e.to_string())?;
    ensure!(scores.len() == 6 && scores.iter().all(|s| s.mean == 0.0), "neutral {scores:?}");

    let responses = parse_ueq_csv(&read_fixture("ueq_reference_pattern.csv")).map_err(|e| e.to_string())?;
    let scores = score_ueq(&responses, &map).map_err(|e| e.to_string())?;
    let table = BenchmarkTable::standard();
    let category = |scale: UeqScale| -> Result<(f64, BenchmarkCategory), String> {
        let s = scores.iter().find(|s| s.scale == scale).ok_or("scale missing")?;
        Ok((s.mean, table.classify(scale, s.mean).map_err(|e| e.to_string())?))
    };
    for scale in [UeqScale::Attractiveness, UeqScale::Stimulation, UeqScale::Novelty] {
        let (mean, c) = category(scale)?;
        ensure!(c == BenchmarkCategory::Excellent, "{scale} {mean} is {c:?}");
    }
    let (mean, c) = category(UeqScale::Efficiency)?;
    ensure!(c == BenchmarkCategory::BelowAverage, "Efficiency is {c:?}");
    ensure!((mean * 100.0).round() == 91.0, "Efficiency mean {mean}");
    Ok(format!("neutral zeros; Efficiency {mean:.2} Below Average"))
}

// 6 ------------------------------------------------------------------------

fn gamma_half(k: u32) -> f64 {
    let (mut g, mut a) = if k % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while a < f64::from(k) / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Simpson's rule on the chi-square density after t = u².
fn sf_by_quadrature(x: f64, k: u32) -> f64 {
    let norm = 2f64.powf(f64::from(k) / 2.0) * gamma_half(k);
    let f = |u: f64| 2.0 * u.powi(k as i32 - 1) * (-u * u / 2.0).exp() / norm;
    let upper = x.sqrt();
    let n = 40_000;
    let h = upper / n as f64;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h)).sum();
    1.0 - (f(0.0) + f(upper) + inner) * h / 3.0
}

fn statistics() -> Verdict {
    let votes = |counts: Vec<u64>| {
        let cats = (0..counts.len()).map(|i| format!("c{i}")).collect();
        CategoricalVotes::new(cats, counts, 10).map_err(|e| e.to_string())
    };
    let uniform = chi_square_gof(&votes(vec![7; 6])?, &Expected::Uniform).map_err(|e| e.to_string())?;
    ensure!(uniform.chi2 == 0.0, "uniform chi2 {}", uniform.chi2);
    let skewed = chi_square_gof(&votes(vec![10, 0, 0, 0, 0, 0])?, &Expected::Uniform).map_err(|e| e.to_string())?;
    ensure!((skewed.chi2 - 50.0).abs() <= 1e-9, "skewed chi2 {}", skewed.chi2);
    ensure!(skewed.df == 5, "df {}", skewed.df);
    let p = chi_square_sf(88.78, 5);
    ensure!(p < 0.001, "sf(88.78, 5) = {p}");
    let holm = holm_adjust(&[0.01, 0.04, 0.03]);
    let want = [0.03, 0.06, 0.06];
    ensure!(holm.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "holm {holm:?}");
    let mut worst: f64 = 0.0;
    for &x in &[0.1, 0.5, 2.0, 5.0, 11.07, 20.0, 50.0, 88.78] {
        for k in 1..=10 {
            worst = worst.max((chi_square_sf(x, k) - sf_by_quadrature(x, k)).abs());
        }
    }
    ensure!(worst < 1e-6, "largest deviation from quadrature {worst:e}");
    Ok(format!("sf(88.78, 5) = {p:.3e}; max quadrature deviation {worst:.1e}"))
}

// 7 ------------------------------------------------------------------------

fn random_box(rng: &mut ChaCha8Rng, side: f64) -> BBox {
    let h = side * 1.2;
    BBox::new(rng.random_range(0.0..640.0 - side), rng.random_range(0.0..480.0 - h), side, h)
}

fn perception() -> Verdict {
    let (mut direct, mut fallback) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let synth = FaceSynth::new(seed);
        let ids: Vec<u32> = (0..rng.random_range(2..=5u32)).map(|i| 100 * seed as u32 + i + 1).collect();
        let sides: Vec<f64> = ids.iter().map(|_| rng.random_range(30.0..180.0)).collect();
        let mut frames = Vec::new();
        for f in 0..rng.random_range(5..25u64) {
            let mut detections = Vec::new();
            for (&id, &side) in ids.iter().zip(&sides) {
                if rng.random_bool(0.85) {
                    let side = side * rng.random_range(0.9..1.1);
                    let bbox = random_box(&mut rng, side);
                    detections.push(synth.detection(id, bbox, f).map_err(|e| e.to_string())?);
                }
            }
            frames.push(FaceFrame { at_ms: f * 100, detections });
        }
        let mut areas: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        for d in frames.iter().flat_map(|f| &f.detections) {
            let e = areas.entry(d.track_id()).or_default();
            e.0 += d.bbox().w * d.bbox().h;
            e.1 += 1.0;
        }
        let biggest = areas
            .iter()
            .map(|(&id, &(sum, n))| (id, sum / n))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
            .0;
        let model = enroll_partner(&frames, 60_000, 0.5).map_err(|e| e.to_string())?;
        ensure!(model.partner_track == biggest, "scene {seed}: enrolled {} not {biggest}", model.partner_track);

        let probe: Vec<FaceDetection> = ids
            .iter()
            .map(|&id| {
                let side = rng.random_range(30.0..180.0);
                let bbox = random_box(&mut rng, side);
                synth.detection(id, bbox, 999).unwrap()
            })
            .collect();
        for mask in 1u32..(1 << probe.len()) {
            let dets: Vec<FaceDetection> =
                probe.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, d)| d.clone()).collect();
            let got = recognize_partner(&dets, &model).map_err(|e| e.to_string())?;
            let known = dets.iter().any(|d| model.confidence(d.embedding()) >= model.threshold);
            if known {
                direct += 1;
                ensure!(!got.fallback, "scene {seed}: fell back with a known face in view");
            } else {
                fallback += 1;
                let largest = dets.iter().map(|d| d.bbox().w * d.bbox().h).fold(f64::NEG_INFINITY, f64::max);
                ensure!(got.fallback, "scene {seed}: no fallback flag");
                ensure!(got.detection.bbox().w * got.detection.bbox().h == largest, "scene {seed}: not the closest face");
            }
            if dets.iter().any(|d| d.track_id() == biggest) {
                ensure!(got.detection.track_id() == biggest, "scene {seed}: partner in view but not chosen");
            }
        }
    }
    ensure!(direct > 0 && fallback > 0, "rules exercised: {direct} direct, {fallback} fallback");

    let gaze_model = GazeModel::standard();
    let gaze = GazeSynth::default();
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    for _ in 0..1_000 {
        let kp = gaze.render(rng.random_range(-180.0..180.0), (320.0, 240.0), rng.random_range(10.0..120.0), &mut rng);
        let fv = kp.to_vector();
        ensure!(fv.values().len() == 57 && GAZE_FEATURES == 57, "gaze vector of {}", fv.values().len());
        classify_mutual_gaze(fv.values(), &gaze_model).map_err(|e| e.to_string())?;
    }
    for bad in [0, 56, 58] {
        ensure!(
            matches!(classify_mutual_gaze(&vec![0.0; bad], &gaze_model), Err(PerceptionError::MalformedFeature(_))),
            "length {bad} accepted"
        );
    }

    let pool: Vec<StickerId> = STICKERS.iter().map(|s| StickerId::new(*s).unwrap()).collect();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut detector = ObjectDetector::new([0.0, 0.3][seed as usize % 2], seed);
        let mut registered = BTreeSet::new();
        for ts in 0..50 {
            let label = pool[rng.random_range(0..pool.len())].clone();
            if rng.random_bool(0.3) {
                let sample = CubeObservation {
                    bbox: BBox::new(250.0, 170.0, 120.0, 120.0),
                    class_label: label.clone(),
                    confidence: 1.0,
                    frame_ts: 0,
                };
                let fresh = registered.insert(label.clone());
                ensure!(detector.register_object_class(label.clone(), &[sample]).is_ok() == fresh, "register {label}");
            } else if let Ok(obs) = detector.detect_cube(Some(&CubePresentation::new(label.clone())), ts) {
                ensure!(registered.contains(&obs.class_label), "detected unregistered {}", obs.class_label);
                ensure!(registered.contains(&label), "detected a cube whose class is unknown");
            }
            let labels: BTreeSet<StickerId> = detector.labels().into_iter().cloned().collect();
            ensure!(labels == registered, "registry diverged at seed {seed}");
        }
    }
    Ok(format!("100 scenes ({direct} direct, {fallback} fallback recognitions)"))
}

// 8 ------------------------------------------------------------------------

const DESCRIBER_HASH: &str = "9d7255d0be0d4d25b53d0cb624f1609fff5f798e9f4c16f4356e87799a9d927c";
const NARRATOR_HASH: &str = "b1ae1248273658bbf317ee9845ed70c5fbac89a08e50d4c3f8a8e544969144a2";

fn sha256(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn words(text: &str) -> usize {
    text.split_whitespace().filter(|t| t.chars().any(char::is_alphanumeric)).count()
}

fn forbidden(text: &str, words: &[&str]) -> bool {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .any(|run| words.iter().any(|f| run == *f || run == format!("{f}s") || run == format!("{f}es")))
}

fn adversarial_reply(rng: &mut ChaCha8Rng) -> MockReply {
    const NASTY: [&str; 8] = ["sticker", "Stickers,", "CARTOON", "cardbox!", "sticker-koala", "?!", "1234", "ünïcödé"];
    match rng.random_range(0..8) {
        0 => MockReply::Error { error: "overloaded".into() },
        1 => MockReply::Text(String::new()),
        _ => MockReply::Text(
            (0..rng.random_range(0..60))
                .map(|_| {
                    if rng.random_bool(0.3) {
                        NASTY[rng.random_range(0..NASTY.len())].to_string()
                    } else {
                        (0..rng.random_range(1..9)).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
                    }
                })
                .collect::<Vec<_>>()
                .join(" "),
        ),
    }
}

fn adversarial_endpoint(rng: &mut ChaCha8Rng) -> MockEndpoint {
    MockEndpoint {
        responses: (0..rng.random_range(0..6)).map(|_| adversarial_reply(rng)).collect(),
        then: [Then::Echo, Then::Fail, Then::RepeatLast, Then::Cycle][rng.random_range(0..4)],
        latency_ms: None,
    }
}

fn prompt_fidelity() -> Verdict {
    ensure!(sha256(DESCRIBER_SYSTEM_PROMPT) == DESCRIBER_HASH, "describer prompt hash");
    ensure!(sha256(NARRATOR_SYSTEM_PROMPT) == NARRATOR_HASH, "narrator prompt hash");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SessionConfig::default();
    let scene = Scene::load(&fixture("happy3.scene"), cfg.perception.seed).map_err(|e| e.to_string())?;
    replay_scene(&cfg, &scene, Some(dir.path()), None).map_err(|e| e.to_string())?;
    let log = std::fs::read_to_string(dir.path().join(GENAI_LOG)).map_err(|e| e.to_string())?;
    let mut sent = 0;
    for line in log.lines() {
        let ex: Exchange = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let system = &ex.request.messages[0];
        let want = match ex.endpoint {
            Endpoint::Describer => DESCRIBER_HASH,
            Endpoint::Narrator => NARRATOR_HASH,
        };
        ensure!(system.role == Role::System && sha256(&system.content) == want, "{:?} request prompt differs", ex.endpoint);
        sent += 1;
    }
    ensure!(sent == 18, "{sent} exchanges logged");

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut kept, mut refused) = (0, 0);
    for case in 0..300 {
        let retries = rng.random_range(0..3);
        let fixture = MockFixture {
            seed: case,
            latency_ms: 10,
            describer: adversarial_endpoint(&mut rng),
            narrator: adversarial_endpoint(&mut rng),
        };
        let prompts = PromptConfig {
            max_retries: retries,
            ..PromptConfig::default()
        };
        let mut client = GenAiClient::new(prompts, Box::new(MockTransport::new(fixture)));
        let cube = CubeRef {
            sticker: StickerId::new("koala").unwrap(),
            scene_text: "A grey smiling koala".into(),
            image: None,
        };
        for _ in 0..3 {
            let description = match client.describe_sticker(&cube) {
                Ok(d) => {
                    ensure!((1..=10).contains(&words(&d.text)), "case {case}: description {:?}", d.text);
                    ensure!(d.word_count == words(&d.text), "case {case}: word_count");
                    ensure!(!forbidden(&d.text, &["sticker"]), "case {case}: description {:?}", d.text);
                    kept += 1;
                    d
                }
                Err(GenAiError::TransportFailure { .. } | GenAiError::Unusable { .. }) => {
                    refused += 1;
                    StickerDescription {
                        text: "A grey koala".into(),
                        word_count: 3,
                        source_cube: cube.sticker.clone(),
                        latency_ms: 0,
                    }
                }
                Err(e) => return Err(format!("case {case}: {e}")),
            };
            match client.generate_snippet(&StoryTranscript::new(), StoryStep::Opening, &description, 1) {
                Ok(s) => {
                    ensure!((1..=15).contains(&words(&s.text)), "case {case}: snippet {:?}", s.text);
                    ensure!(s.word_count == words(&s.text), "case {case}: word_count");
                    ensure!(!forbidden(&s.text, &["cartoon", "cardbox", "sticker"]), "case {case}: snippet {:?}", s.text);
                    kept += 1;
                }
                Err(GenAiError::TransportFailure { .. } | GenAiError::Unusable { .. }) => refused += 1,
                Err(e) => return Err(format!("case {case}: {e}")),
            }
        }
        for ex in client.take_log() {
            ensure!(ex.attempt >= 1 && ex.attempt <= 1 + retries, "case {case}: attempt {}", ex.attempt);
        }
    }
    ensure!(kept > 0 && refused > 0, "both outcomes exercised: {kept} kept, {refused} refused");
    Ok(format!("hashes match; 300 adversarial mocks ({kept} outputs kept, {refused} refused)"))
}

// 9 ------------------------------------------------------------------------

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let leaf = depth == 0 || rng.random_bool(0.5);
    match rng.random_range(0..if leaf { 4 } else { 6 }) {
        0 => Value::Null,
        1 => json!(rng.random::<i64>()),
        2 => json!(rng.random_range(-1e9..1e9_f64)),
        3 => Value::String((0..rng.random_range(0..16)).map(|_| rng.random_range(' '..='~')).collect()),
        4 => Value::Array((0..rng.random_range(0..4)).map(|_| random_value(rng, depth - 1)).collect()),
        _ => {
            let mut m = Map::new();
            for i in 0..rng.random_range(0..4) {
                m.insert(format!("k{i}"), random_value(rng, depth - 1));
            }
            Value::Object(m)
        }
    }
}

fn middleware() -> Verdict {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kinds = [MessageKind::Event, MessageKind::Command, MessageKind::Reply, MessageKind::Stream];
    let msgs: Vec<PortMessage> = (0..N)
        .map(|i| PortMessage {
            seq: i as u64 + 1,
            sent_at: rng.random(),
            kind: kinds[rng.random_range(0..4)],
            payload: random_value(&mut rng, 3),
        })
        .collect();
    for m in &msgs {
        let bytes = encode_message(m).map_err(|e| e.to_string())?;
        let (frame, used) = decode(&bytes).map_err(|e| e.to_string())?;
        ensure!(used == bytes.len() && frame == Frame::Message(m.clone()), "codec round trip of seq {}", m.seq);
    }

    let node = std::sync::Arc::new(Node::new(Registry::new()).with_connect_timeout(Duration::from_millis(800)));
    node.register_port("/acc/out", "127.0.0.1", 0).map_err(|e| e.to_string())?;
    node.register_port("/acc/in", "127.0.0.1", 0).map_err(|e| e.to_string())?;
    let link = node.connect("/acc/out", "/acc/in").map_err(|e| e.to_string())?;
    let receiver = {
        let node = std::sync::Arc::clone(&node);
        thread::spawn(move || {
            let mut got = Vec::with_capacity(N);
            let deadline = Instant::now() + Duration::from_secs(40);
            while got.len() < N && Instant::now() < deadline {
                if let Ok(Some(d)) = node.recv_timeout("/acc/in", Duration::from_millis(100)) {
                    got.push(d.msg);
                }
            }
            got
        })
    };
    for m in &msgs {
        let n = node.publish("/acc/out", m.kind, m.payload.clone()).map_err(|e| e.to_string())?;
        ensure!(n == 1, "publish reached {n} links");
    }
    let got = receiver.join().map_err(|_| "receiver panicked")?;
    ensure!(got.len() == N, "{} of {N} delivered", got.len());
    for (i, (g, m)) in got.iter().zip(&msgs).enumerate() {
        ensure!(g.seq == i as u64 + 1 && g.kind == m.kind && g.payload == m.payload, "message {i} out of order or altered");
    }

    // Subscriber goes away and comes back.
    node.deregister("/acc/in").map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(5);
    while link.is_up() && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    ensure!(!link.is_up(), "link still up after the subscriber left");
    node.register_port("/acc/in", "127.0.0.1", 0).map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut delivered = 0;
    while delivered == 0 && Instant::now() < deadline {
        delivered = node.publish("/acc/out", MessageKind::Event, json!("again")).map_err(|e| e.to_string())?;
        if delivered == 0 {
            thread::sleep(Duration::from_millis(50));
        }
    }
    ensure!(delivered == 1, "no delivery after the subscriber returned");
    let back = node.recv_timeout("/acc/in", Duration::from_secs(2)).map_err(|e| e.to_string())?;
    ensure!(back.is_some_and(|d| d.msg.payload == json!("again")), "reconnected delivery lost");
    Ok(format!("{N} messages in order; reconnect delivered"))
}

// ---------------------------------------------------------------------------

fn run(check: fn() -> Verdict) -> Verdict {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let verdict = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let _ = tx.send(verdict);
    });
    rx.recv_timeout(WATCHDOG)
        .unwrap_or_else(|_| Err(format!("no verdict within {} s", WATCHDOG.as_secs())))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("happy path", happy_path),
        ("failure injection", failure_injection),
        ("metrics oracle", metrics_oracle),
        ("SUS", sus),
        ("UEQ", ueq),
        ("statistics", statistics),
        ("perception", perception),
        ("prompt fidelity", prompt_fidelity),
        ("middleware", middleware),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let verdict = run(check);
        let ms = started.elapsed().as_millis();
        match verdict {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
