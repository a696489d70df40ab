//! Scene scripts: timed participant and operator inputs for headless runs.
//!
//! ```json
//! {"name": "demo",
//!  "settings": {"trials_total": 1},
//!  "events": [
//!    {"at_ms": 0, "kind": "face", "params": {"faces": [{"identity": 1, "bbox": [200, 120, 120, 150]}], "frames": 5, "every_ms": 200}},
//!    {"at_ms": 0, "kind": "cube", "params": {"sticker": "castle"}},
//!    {"at_ms": 0, "kind": "speech", "params": {"text": "The koala moved in."}}
//!  ]}
//! ```
//!
//! Events are consumed strictly in order. The head event is delivered once
//! its `at_ms` has passed and the session has reached its `trial` (if set).
//! Cube and speech events additionally wait until the session asks for that
//! input; while the head is held back, every wait times out.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::clock::Clock;
use crate::config::SessionConfig;
use crate::manifest::StickerId;
use crate::perception::{BBox, CubePresentation, FaceFrame, FaceSynth, GazeFeatureVector, GazeSynth};
use crate::session::{FeedContext, FeedItem, InputFeed, SessionInput, Wants};
use crate::store::AnnotationInput;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene {path}: {detail}")]
    Io { path: PathBuf, detail: String },
    #[error("malformed scene: {0}")]
    Parse(String),
    #[error("event {index}: at_ms goes backwards")]
    Unordered { index: usize },
    #[error("event {index} ({kind}): {detail}")]
    InvalidParams {
        index: usize,
        kind: &'static str,
        detail: String,
    },
}

/// Overrides a scene applies to the session configuration.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSettings {
    pub trials_total: Option<u32>,
    pub participant_id: Option<String>,
    pub misdetection_probability: Option<f64>,
    pub max_retries: Option<u32>,
    pub seed: Option<u64>,
    /// Mock fixture, relative to the scene file.
    pub genai_fixture: Option<PathBuf>,
}

impl SceneSettings {
    pub fn apply(&self, cfg: &mut SessionConfig) {
        if let Some(n) = self.trials_total {
            cfg.trials_total = n;
        }
        if let Some(id) = &self.participant_id {
            cfg.participant_id = id.clone();
        }
        if let Some(p) = self.misdetection_probability {
            cfg.perception.misdetection_probability = p;
        }
        if let Some(m) = self.max_retries {
            cfg.retries.max = m;
        }
        if let Some(s) = self.seed {
            cfg.perception.seed = s;
        }
        if let Some(f) = &self.genai_fixture {
            cfg.genai.fixture = Some(f.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Face,
    Cube,
    Gaze,
    Speech,
    Abort,
    Annotation,
    ForceRetry,
}

impl RawKind {
    fn name(self) -> &'static str {
        match self {
            RawKind::Face => "face",
            RawKind::Cube => "cube",
            RawKind::Gaze => "gaze",
            RawKind::Speech => "speech",
            RawKind::Abort => "abort",
            RawKind::Annotation => "annotation",
            RawKind::ForceRetry => "force_retry",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    name: Option<String>,
    #[serde(default)]
    settings: SceneSettings,
    events: Vec<RawEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    at_ms: u64,
    kind: RawKind,
    #[serde(default)]
    trial: Option<u32>,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceSpec {
    identity: u32,
    bbox: [f64; 4],
}

fn one() -> u32 {
    1
}

fn hundred() -> u64 {
    100
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceParams {
    faces: Vec<FaceSpec>,
    #[serde(default = "one")]
    frames: u32,
    #[serde(default = "hundred")]
    every_ms: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GazeParams {
    yaw_deg: Option<f64>,
    features: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeechParams {
    text: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AbortParams {
    reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedInput {
    pub at_ms: u64,
    pub trial: Option<u32>,
    pub input: SessionInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: Option<String>,
    pub settings: SceneSettings,
    pub events: Vec<ScriptedInput>,
}

fn params<T: serde::de::DeserializeOwned>(
    index: usize,
    kind: RawKind,
    value: Value,
) -> Result<T, SceneError> {
    let value = if value.is_null() { Value::Object(Default::default()) } else { value };
    serde_json::from_value(value).map_err(|e| SceneError::InvalidParams {
        index,
        kind: kind.name(),
        detail: e.to_string(),
    })
}

impl Scene {
    /// Parses a scene document. Synthetic faces and gaze are rendered from
    /// the scene seed (`settings.seed`, else `default_seed`).
    pub fn parse(text: &str, default_seed: u64) -> Result<Self, SceneError> {
        let raw: RawScene = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        let seed = raw.settings.seed.unwrap_or(default_seed);
        let faces = FaceSynth::new(seed);
        let gaze = GazeSynth::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = Vec::new();
        let mut last = 0;
        for (index, ev) in raw.events.into_iter().enumerate() {
            if ev.at_ms < last {
                return Err(SceneError::Unordered { index });
            }
            last = ev.at_ms;
            let bad = |detail: String| SceneError::InvalidParams {
                index,
                kind: ev.kind.name(),
                detail,
            };
            let mut push = |at_ms, input| {
                events.push(ScriptedInput {
                    at_ms,
                    trial: ev.trial,
                    input,
                })
            };
            match ev.kind {
                RawKind::Face => {
                    let p: FaceParams = params(index, ev.kind, ev.params)?;
                    if p.frames == 0 {
                        return Err(bad("frames must be at least 1".into()));
                    }
                    for f in 0..p.frames {
                        let at_ms = ev.at_ms + u64::from(f) * p.every_ms;
                        let detections = p
                            .faces
                            .iter()
                            .map(|s| {
                                let [x, y, w, h] = s.bbox;
                                faces.detection(s.identity, BBox::new(x, y, w, h), u64::from(f))
                            })
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| bad(e.to_string()))?;
                        push(at_ms, SessionInput::Face(FaceFrame { at_ms, detections }));
                    }
                }
                RawKind::Gaze => {
                    let p: GazeParams = params(index, ev.kind, ev.params)?;
                    let fv = match (p.yaw_deg, p.features) {
                        (Some(yaw), None) => gaze.render(yaw, (320.0, 200.0), 60.0, &mut rng).to_vector(),
                        (None, Some(values)) => GazeFeatureVector::new(values).map_err(|e| bad(e.to_string()))?,
                        _ => return Err(bad("exactly one of yaw_deg and features".into())),
                    };
                    push(ev.at_ms, SessionInput::Gaze(fv));
                }
                RawKind::Cube => {
                    let p: CubePresentation = params(index, ev.kind, ev.params)?;
                    if !(0.0..=1.0).contains(&p.noise) {
                        return Err(bad(format!("noise {} outside [0, 1]", p.noise)));
                    }
                    push(ev.at_ms, SessionInput::Cube(p));
                }
                RawKind::Speech => {
                    let p: SpeechParams = params(index, ev.kind, ev.params)?;
                    push(ev.at_ms, SessionInput::Speech(p.text));
                }
                RawKind::Abort => {
                    let p: AbortParams = params(index, ev.kind, ev.params)?;
                    push(ev.at_ms, SessionInput::Abort { reason: p.reason });
                }
                RawKind::Annotation => {
                    let p: AnnotationInput = params(index, ev.kind, ev.params)?;
                    push(ev.at_ms, SessionInput::Annotation(p));
                }
                RawKind::ForceRetry => push(ev.at_ms, SessionInput::ForceRetry),
            }
        }
        Ok(Self {
            name: raw.name,
            settings: raw.settings,
            events,
        })
    }

    /// Loads a scene file; a relative `genai_fixture` resolves against the
    /// scene's directory.
    pub fn load(path: &Path, default_seed: u64) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        let mut scene = Self::parse(&text, default_seed)?;
        if let Some(f) = scene.settings.genai_fixture.as_mut() {
            if f.is_relative() {
                *f = path.parent().unwrap_or(Path::new(".")).join(&*f);
            }
        }
        if scene.name.is_none() {
            scene.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(scene)
    }

    /// Stickers referenced by cube events.
    pub fn stickers(&self) -> Vec<&StickerId> {
        self.events
            .iter()
            .filter_map(|e| match &e.input {
                SessionInput::Cube(c) => Some(&c.sticker),
                _ => None,
            })
            .collect()
    }
}

/// Delivers a scene's inputs to the session driver.
pub struct SceneFeed {
    queue: VecDeque<ScriptedInput>,
}

impl SceneFeed {
    pub fn new(scene: Scene) -> Self {
        Self {
            queue: scene.events.into(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

fn wanted(input: &SessionInput, wants: Wants) -> bool {
    match input {
        SessionInput::Cube(_) => wants == Wants::Cube,
        SessionInput::Speech(_) => wants == Wants::Speech,
        _ => true,
    }
}

impl InputFeed for SceneFeed {
    fn next_input(&mut self, clock: &dyn Clock, ctx: &FeedContext) -> FeedItem {
        let wait_out = |clock: &dyn Clock| match ctx.deadline {
            Some(d) => {
                clock.sleep_until(d);
                FeedItem::Idle
            }
            None => FeedItem::Closed,
        };
        let Some(head) = self.queue.front() else {
            return wait_out(clock);
        };
        let reached = head.trial.is_none_or(|t| ctx.trial_index >= t);
        if !reached || !wanted(&head.input, ctx.wants) {
            return wait_out(clock);
        }
        if let Some(d) = ctx.deadline {
            if head.at_ms > d {
                return wait_out(clock);
            }
        }
        clock.sleep_until(head.at_ms);
        FeedItem::Input(self.queue.pop_front().expect("head exists").input)
    }
}
