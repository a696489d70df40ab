use std::path::PathBuf;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use narravine_core::SessionConfig;
use narravine_supervisor::gateway::router;
use narravine_supervisor::hub::Hub;
use narravine_supervisor::modules::Modules;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> SessionConfig {
    let mut cfg = SessionConfig {
        trials_total: 1,
        participant_id: "T01".into(),
        ..SessionConfig::default()
    };
    cfg.speech.time_scale = 0.01;
    cfg.timeouts.cube_ms = 1_000_000;
    cfg.timeouts.speech_ms = 1_000_000;
    cfg
}

fn hub(cfg: SessionConfig) -> Hub {
    Hub::new(cfg, Some(Modules::boot("127.0.0.1", None).unwrap())).unwrap()
}

async fn call(hub: &Hub, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(hub.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn state(hub: &Hub) -> Value {
    call(hub, "GET", "/api/state", None).await.1
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_state_and_static_routes() {
    let hub = hub(config());
    let s = state(&hub).await;
    assert_eq!(s["phase"], "Idle");
    assert_eq!(s["running"], false);
    assert_eq!(s["admissible"], json!(["StartSession"]));
    for gate in ["hand_cube", "speech_text", "annotation", "abort", "force_retry"] {
        assert_eq!(s["inputs"][gate], false, "{gate}");
    }

    let (status, fsm) = call(&hub, "GET", "/api/fsm", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(fsm["nodes"].as_array().unwrap().len() >= 8);
    let (status, manifest) = call(&hub, "GET", "/api/manifest", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(manifest["stickers"].as_array().unwrap().iter().any(|s| s["id"] == "koala"));
}

#[tokio::test(flavor = "multi_thread")]
async fn inputs_are_refused_without_a_session() {
    let hub = hub(config());
    let cube = json!({"kind": "hand_cube", "payload": {"sticker": "koala"}});
    assert_eq!(call(&hub, "POST", "/api/input", Some(cube)).await.0, StatusCode::CONFLICT);
    let unknown = json!({"kind": "hand_cube", "payload": {"sticker": "unicorn"}});
    assert_eq!(call(&hub, "POST", "/api/input", Some(unknown)).await.0, StatusCode::BAD_REQUEST);
    let blank = json!({"kind": "speech_text", "payload": {"text": ""}});
    assert_eq!(call(&hub, "POST", "/api/input", Some(blank)).await.0, StatusCode::BAD_REQUEST);
    let (status, body) = call(&hub, "POST", "/api/session/start", Some(json!({"trials_total": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("trials_total"));
    let bogus = json!({"scene": "/no/such.scene"});
    assert_eq!(call(&hub, "POST", "/api/session/start", Some(bogus)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn console_drives_an_interactive_session_to_closure() {
    let hub = hub(config());
    let (status, body) = call(&hub, "POST", "/api/session/start", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (status, _) = call(&hub, "POST", "/api/session/start", None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let stickers = ["castle", "koala", "rocket"];
    let (mut cubes, mut speeches, mut refused_twice) = (0, 0, false);
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        assert!(Instant::now() < deadline, "session stalled: {}", state(&hub).await);
        let s = state(&hub).await;
        if s["running"] == false {
            break;
        }
        if s["inputs"]["hand_cube"] == true {
            let input = json!({"kind": "hand_cube", "payload": {"sticker": stickers[cubes % 3]}});
            let (status, body) = call(&hub, "POST", "/api/input", Some(input.clone())).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            // A second cube before the session has taken the first is refused.
            assert_eq!(call(&hub, "POST", "/api/input", Some(input)).await.0, StatusCode::CONFLICT);
            refused_twice = true;
            cubes += 1;
        } else if s["inputs"]["speech_text"] == true {
            let input = json!({"kind": "speech_text", "payload": {"text": "the koala flew over the castle"}});
            assert_eq!(call(&hub, "POST", "/api/input", Some(input)).await.0, StatusCode::OK);
            speeches += 1;
        } else {
            // Nothing to hand over here; speech must be refused.
            if s["awaiting"] != "Speech" {
                let early = json!({"kind": "speech_text", "payload": {"text": "hello"}});
                let status = call(&hub, "POST", "/api/input", Some(early)).await.0;
                assert!(status == StatusCode::CONFLICT || status == StatusCode::OK);
                if status == StatusCode::OK {
                    speeches += 1;
                }
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }
    assert!(refused_twice);
    assert_eq!(cubes, 3);
    assert!(speeches >= 1);
    let s = state(&hub).await;
    assert_eq!(s["phase"], "Closure");
    assert_eq!(s["summary"]["trials"][0]["outcome"], "success", "{s}");
    assert_eq!(s["summary"]["success_rate"], 1.0);
}

#[tokio::test(flavor = "multi_thread")]
async fn operator_abort_ends_the_session() {
    let hub = hub(config());
    call(&hub, "POST", "/api/session/start", None).await;
    let deadline = Instant::now() + Duration::from_secs(30);
    while state(&hub).await["inputs"]["abort"] != true {
        assert!(Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let (status, _) = call(&hub, "POST", "/api/input", Some(json!({"kind": "abort", "payload": {"reason": "test"}}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(tokio::task::spawn_blocking({
        let hub = hub.clone();
        move || hub.wait_idle(Some(Duration::from_secs(30)))
    })
    .await
    .unwrap());
    let s = state(&hub).await;
    assert_eq!(s["phase"], "Closure");
    assert_eq!(s["summary"]["aborted"], true);
}

/// Reads SSE frames until `session_ended`, returning (event, data) pairs.
async fn read_stream(body: Body) -> Vec<(String, Value)> {
    let mut body = body;
    let mut buf = String::new();
    let mut events = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        let frame = tokio::time::timeout(left, body.frame()).await.expect("stream stalled");
        let Some(frame) = frame else { break };
        if let Ok(data) = frame.unwrap().into_data() {
            buf.push_str(std::str::from_utf8(&data).unwrap());
        }
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let mut name = String::new();
            let mut data = String::new();
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event: ") {
                    name = v.to_string();
                } else if let Some(v) = line.strip_prefix("data: ") {
                    data.push_str(v);
                }
            }
            if name.is_empty() {
                continue;
            }
            let done = name == "session_ended";
            events.push((name, serde_json::from_str(&data).unwrap()));
            if done {
                return events;
            }
        }
    }
    events
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_mirrors_every_transition_of_a_scripted_session() {
    let hub = hub(config());
    let req = Request::builder().uri("/api/stream").body(Body::empty()).unwrap();
    let resp = router(hub.clone()).oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let reader = tokio::spawn(read_stream(resp.into_body()));

    let scene = fixtures().join("happy3.scene");
    let start = json!({"scene": scene, "time_scale": 0.0005});
    let (status, body) = call(&hub, "POST", "/api/session/start", Some(start)).await;
    assert_eq!(status, StatusCode::OK, "{body}");

    // Scripted sessions take no console input.
    let cube = json!({"kind": "hand_cube", "payload": {"sticker": "koala"}});
    assert_eq!(call(&hub, "POST", "/api/input", Some(cube)).await.0, StatusCode::CONFLICT);

    let events = reader.await.unwrap();
    assert_eq!(events[0].0, "state");
    assert_eq!(events[0].1["phase"], "Idle");
    assert_eq!(events[1].0, "session_started");
    let transitions: Vec<&Value> = events.iter().filter(|(n, _)| n == "transition").map(|(_, v)| v).collect();
    let mut phase = "Idle".to_string();
    for t in &transitions {
        assert_eq!(t["record"]["phase_from"], phase.as_str());
        phase = t["record"]["phase_to"].as_str().unwrap().to_string();
    }
    assert_eq!(phase, "Closure");
    let trials = events.iter().filter(|(n, _)| n == "trial").count();
    assert_eq!(trials, 3);
    assert!(events.iter().any(|(n, _)| n == "utterance"));
    assert!(events.iter().any(|(n, _)| n == "percept"));
    let (last, summary) = events.last().unwrap();
    assert_eq!(last, "session_ended");
    assert_eq!(summary["summary"]["success_rate"], 1.0);

    // Every transition the session logged went out on the stream.
    let s = state(&hub).await;
    assert_eq!(s["phase"], "Closure");
    assert_eq!(transitions.len(), 35);
}
