//! HTTP gateway for the operator console.
//!
//! | route                     | purpose                                   |
//! |---------------------------|-------------------------------------------|
//! | `GET  /api/state`         | session snapshot and input gates          |
//! | `GET  /api/stream`        | server-sent events, one per session event |
//! | `POST /api/input`         | `{kind, payload}` console input           |
//! | `POST /api/session/start` | start a session, optional overrides       |
//! | `GET  /api/fsm`           | phase graph for the console diagram       |
//! | `GET  /api/manifest`      | sticker manifest                          |

use std::convert::Infallible;
use std::future::Future;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use narravine_core::fsm::fsm_graph;
use narravine_core::perception::CubePresentation;
use narravine_core::session::SessionInput;
use narravine_core::store::AnnotationInput;
use narravine_core::{StickerId, StickerManifest};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::hub::{Hub, InputError, StartError, StartRequest};

#[derive(Debug, Error, PartialEq)]
pub enum PayloadError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("unknown input kind {0:?}")]
    UnknownKind(String),
    #[error("sticker {0:?} is not in the manifest")]
    UnknownSticker(String),
    #[error("speech text is empty")]
    EmptySpeech,
    #[error("noise must lie in [0, 1], got {0}")]
    Noise(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    kind: String,
    #[serde(default)]
    payload: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HandCube {
    sticker: String,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    dropped: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeechText {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Abort {
    #[serde(default)]
    reason: Option<String>,
}

fn payload<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, PayloadError> {
    let value = if value.is_null() { json!({}) } else { value };
    serde_json::from_value(value).map_err(|e| PayloadError::Malformed(e.to_string()))
}

/// Decodes a console input body. Stickers are checked against `manifest`.
pub fn parse_input(body: &[u8], manifest: &StickerManifest) -> Result<SessionInput, PayloadError> {
    let raw: RawInput = serde_json::from_slice(body).map_err(|e| PayloadError::Malformed(e.to_string()))?;
    match raw.kind.as_str() {
        "hand_cube" => {
            let p: HandCube = payload(raw.payload)?;
            let sticker = StickerId::new(p.sticker.as_str())
                .ok()
                .filter(|id| manifest.get(id).is_some())
                .ok_or(PayloadError::UnknownSticker(p.sticker))?;
            if !(0.0..=1.0).contains(&p.noise) {
                return Err(PayloadError::Noise(p.noise));
            }
            Ok(SessionInput::Cube(CubePresentation {
                sticker,
                noise: p.noise,
                dropped: p.dropped,
            }))
        }
        "speech_text" => {
            let p: SpeechText = payload(raw.payload)?;
            if p.text.trim().is_empty() {
                return Err(PayloadError::EmptySpeech);
            }
            Ok(SessionInput::Speech(p.text))
        }
        "annotation" => Ok(SessionInput::Annotation(payload::<AnnotationInput>(raw.payload)?)),
        "abort" => Ok(SessionInput::Abort {
            reason: payload::<Abort>(raw.payload)?.reason,
        }),
        "force_retry" => {
            payload::<serde::de::IgnoredAny>(raw.payload)?;
            Ok(SessionInput::ForceRetry)
        }
        other => Err(PayloadError::UnknownKind(other.to_string())),
    }
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn state(State(hub): State<Hub>) -> Response {
    Json(hub.snapshot()).into_response()
}

async fn manifest(State(hub): State<Hub>) -> Response {
    Json(hub.manifest().clone()).into_response()
}

async fn fsm() -> Response {
    Json(fsm_graph()).into_response()
}

async fn input(State(hub): State<Hub>, body: Bytes) -> Response {
    let input = match parse_input(&body, hub.manifest()) {
        Ok(i) => i,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let kind = input.name();
    match hub.submit(input) {
        Ok(()) => Json(json!({ "accepted": kind })).into_response(),
        Err(e @ (InputError::NoSession | InputError::Scripted | InputError::Inadmissible { .. } | InputError::InFlight { .. })) => {
            error(StatusCode::CONFLICT, e)
        }
    }
}

async fn start(State(hub): State<Hub>, body: Bytes) -> Response {
    let request: StartRequest = if body.iter().all(u8::is_ascii_whitespace) {
        StartRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed start request: {e}")),
        }
    };
    // Scene loading reads files; keep it off the async workers.
    let result = tokio::task::spawn_blocking(move || hub.start(&request)).await;
    match result {
        Ok(Ok(session)) => Json(json!({ "session": session })).into_response(),
        Ok(Err(StartError::AlreadyRunning)) => error(StatusCode::CONFLICT, StartError::AlreadyRunning),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

fn event_stream(hub: &Hub) -> impl Stream<Item = Result<Event, Infallible>> + use<> {
    // Subscribe before taking the snapshot so nothing falls in between.
    let rx = hub.subscribe();
    let first = Event::default().event("state").json_data(hub.snapshot()).expect("snapshot serializes");
    let events = BroadcastStream::new(rx).map(|item| {
        Ok(match item {
            Ok(ev) => Event::default().event(ev.name()).json_data(&ev).expect("events serialize"),
            Err(lagged) => Event::default().event("lagged").data(lagged.to_string()),
        })
    });
    tokio_stream::once(Ok(first)).chain(events)
}

async fn stream(State(hub): State<Hub>) -> Response {
    Sse::new(event_stream(&hub)).keep_alive(KeepAlive::default()).into_response()
}

pub fn router(hub: Hub) -> Router {
    Router::new()
        .route("/api/state", get(state))
        .route("/api/stream", get(stream))
        .route("/api/input", post(input))
        .route("/api/session/start", post(start))
        .route("/api/fsm", get(fsm))
        .route("/api/manifest", get(manifest))
        .with_state(hub)
}

pub async fn serve(
    listener: TcpListener,
    hub: Hub,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(hub)).with_graceful_shutdown(shutdown).await
}
