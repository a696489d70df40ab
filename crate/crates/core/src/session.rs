//! The session driver: a single event loop that folds [`fsm::step`] over
//! events, carries out the commands it returns and turns their results back
//! into events.
//!
//! Internal work (speaking, generative calls, rescans) completes
//! synchronously and enqueues its completion event. Waits on the
//! participant (enrollment, cube handover, speech) read from an
//! [`InputFeed`], which is either a scene script or the operator console.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::clock::{Clock, SimClock};
use crate::config::{ConfigError, SessionConfig, TransportKind};
use crate::fsm::{
    self, admissible, operator_admissible, Awaiting, Command, EventBody, EventKind, FsmConfig, HandedCube, Phase,
    SessionState, TransitionEvent, TransitionRecord,
};
use crate::genai::{sha256_hex, CubeRef, GenAiClient, HttpTransport, MockFixture, MockTransport};
use crate::manifest::StickerManifest;
use crate::perception::{
    enroll_partner, recognize_partner, CubeObservation, CubePresentation, FaceFrame, GazeFeatureVector, GazeLabel,
    GazeModel, ObjectDetector, PartnerModel, PerceptionError, Recognition,
};
use crate::scene::{Scene, SceneError, SceneFeed};
use crate::speech::{ConsoleVoice, ListenWindow, SpeechError, Transcriber, Utterance, Voice};
use crate::store::{AnnotationInput, FailureKind, SessionEnd, SessionMeta, SessionWriter, StoreError, TrialRecord};
use crate::story::Speaker;

/// Something the participant or the operator did.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Face(FaceFrame),
    Gaze(GazeFeatureVector),
    Cube(CubePresentation),
    Speech(String),
    Annotation(AnnotationInput),
    Abort { reason: Option<String> },
    ForceRetry,
}

impl SessionInput {
    /// Inputs that answer a protocol wait, as opposed to sensing and
    /// operator controls.
    pub fn is_protocol(&self) -> bool {
        matches!(self, SessionInput::Cube(_) | SessionInput::Speech(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SessionInput::Face(_) => "face",
            SessionInput::Gaze(_) => "gaze",
            SessionInput::Cube(_) => "cube",
            SessionInput::Speech(_) => "speech",
            SessionInput::Annotation(_) => "annotation",
            SessionInput::Abort { .. } => "abort",
            SessionInput::ForceRetry => "force_retry",
        }
    }
}

/// Whether `input` can be taken in `state`. The console uses this to refuse
/// inputs up front.
pub fn input_admissible(state: &SessionState, input: &SessionInput) -> bool {
    match input {
        SessionInput::Cube(_) => {
            matches!(state.awaiting, Awaiting::Cube { .. })
                && admissible(state.phase).contains(&EventKind::CubeHandedOver)
        }
        SessionInput::Speech(_) => state.awaiting == Awaiting::Speech,
        SessionInput::Abort { .. } | SessionInput::ForceRetry => operator_admissible(state.phase),
        SessionInput::Annotation(_) => state.trial_index > 0 || state.closed_trials > 0,
        SessionInput::Face(_) | SessionInput::Gaze(_) => !state.phase.is_terminal(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Wants {
    Face,
    Cube,
    Speech,
    Nothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedContext {
    /// Session time at which the current wait times out.
    pub deadline: Option<u64>,
    pub wants: Wants,
    pub trial_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedItem {
    Input(SessionInput),
    /// The deadline passed with nothing to deliver.
    Idle,
    /// The feed will never deliver again.
    Closed,
}

pub trait InputFeed {
    fn next_input(&mut self, clock: &dyn Clock, ctx: &FeedContext) -> FeedItem;
}

/// Feed backed by a channel, for live sessions driven from the console.
pub struct ChannelFeed {
    rx: Receiver<SessionInput>,
}

impl ChannelFeed {
    pub fn new(rx: Receiver<SessionInput>) -> Self {
        Self { rx }
    }
}

impl InputFeed for ChannelFeed {
    fn next_input(&mut self, clock: &dyn Clock, ctx: &FeedContext) -> FeedItem {
        const SLICE: Duration = Duration::from_millis(50);
        loop {
            let now = clock.now_ms();
            let wait = match ctx.deadline {
                Some(d) if now >= d => return FeedItem::Idle,
                Some(d) => clock.real(d - now).min(SLICE),
                None => SLICE,
            };
            match self.rx.recv_timeout(wait) {
                Ok(input) => return FeedItem::Input(input),
                Err(RecvTimeoutError::Timeout) => {
                    if wait.is_zero() {
                        if let Some(d) = ctx.deadline {
                            clock.sleep_until(d);
                        }
                    }
                }
                Err(RecvTimeoutError::Disconnected) => return FeedItem::Closed,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "percept", rename_all = "snake_case")]
pub enum Percept {
    Partner { recognition: Recognition },
    Gaze { label: GazeLabel, at_ms: u64 },
    Cube { observation: CubeObservation },
}

/// Receives everything the session does, in order. Used by the gateway's
/// event stream.
pub trait SessionObserver: Send {
    fn transition(&mut self, _record: &TransitionRecord, _state: &SessionState) {}
    fn utterance(&mut self, _utterance: &Utterance) {}
    fn percept(&mut self, _percept: &Percept) {}
    fn trial(&mut self, _record: &TrialRecord) {}
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("fatal module loss: {0}")]
    FatalModuleLoss(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub records: Vec<TrialRecord>,
    pub aborted: bool,
    pub final_state: SessionState,
    pub transitions: Vec<TransitionRecord>,
    pub ended_at: u64,
}

enum Pending {
    Enroll { deadline: u64, window_ms: u64, frames: Vec<FaceFrame> },
    Cube { slot: u8, deadline: u64 },
    Speech { window: Option<ListenWindow>, deadline: u64 },
}

impl Pending {
    fn wants(&self) -> (Wants, u64) {
        match self {
            Pending::Enroll { deadline, .. } => (Wants::Face, *deadline),
            Pending::Cube { deadline, .. } => (Wants::Cube, *deadline),
            Pending::Speech { deadline, .. } => (Wants::Speech, *deadline),
        }
    }
}

pub struct SessionDriver {
    fsm: FsmConfig,
    face_threshold: f64,
    detection_threshold: f64,
    manifest: StickerManifest,
    detector: ObjectDetector,
    gaze: GazeModel,
    genai: GenAiClient,
    voice: Box<dyn Voice>,
    transcriber: Transcriber,
    clock: Arc<dyn Clock>,
    writer: Option<SessionWriter>,
    observer: Option<Box<dyn SessionObserver>>,
    state: SessionState,
    pending: Option<Pending>,
    held: Option<CubePresentation>,
    partner: Option<PartnerModel>,
    annotations: Vec<(u32, AnnotationInput)>,
    records: Vec<TrialRecord>,
    transitions: Vec<TransitionRecord>,
    queue: VecDeque<TransitionEvent>,
}

impl SessionDriver {
    pub fn new(cfg: &SessionConfig, genai: GenAiClient, clock: Arc<dyn Clock>) -> Result<Self, ConfigError> {
        let manifest = cfg.manifest()?;
        let p = &cfg.perception;
        Ok(Self {
            fsm: cfg.fsm_config(),
            face_threshold: p.face_threshold,
            detection_threshold: p.detection_threshold,
            detector: ObjectDetector::with_manifest(&manifest, p.misdetection_probability, p.seed),
            manifest,
            gaze: GazeModel::standard(),
            genai,
            voice: Box::new(ConsoleVoice),
            transcriber: Transcriber::console(),
            clock,
            writer: None,
            observer: None,
            state: SessionState::new(cfg.trials_total, cfg.participant_id.clone()),
            pending: None,
            held: None,
            partner: None,
            annotations: Vec::new(),
            records: Vec::new(),
            transitions: Vec::new(),
            queue: VecDeque::new(),
        })
    }

    pub fn with_writer(mut self, writer: SessionWriter) -> Self {
        self.writer = Some(writer);
        self
    }

    pub fn with_observer(mut self, observer: Box<dyn SessionObserver>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn with_voice(mut self, voice: Box<dyn Voice>, transcriber: Transcriber) -> Self {
        self.voice = voice;
        self.transcriber = transcriber;
        self
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Runs the session to Closure.
    pub fn run(mut self, feed: &mut dyn InputFeed) -> Result<SessionOutcome, SessionError> {
        let start = EventBody::StartSession {
            participant_id: Some(self.state.participant_id.clone()),
        };
        self.queue.push_back(TransitionEvent::new(start, self.now()));
        loop {
            while let Some(event) = self.queue.pop_front() {
                self.apply(event)?;
            }
            if self.state.phase == Phase::Closure {
                break;
            }
            let event = self.wait_external(feed)?;
            self.queue.push_back(event);
        }
        let ended_at = self.now();
        let aborted = self.state.aborted;
        if let Some(w) = self.writer.as_mut() {
            w.finish(SessionEnd {
                at_ms: ended_at,
                aborted,
                trials_recorded: self.records.len(),
            })?;
        }
        Ok(SessionOutcome {
            records: self.records,
            aborted,
            final_state: self.state,
            transitions: self.transitions,
            ended_at,
        })
    }

    fn apply(&mut self, event: TransitionEvent) -> Result<(), SessionError> {
        let from = self.state.phase;
        match fsm::step(&self.state, &event, &self.fsm) {
            Ok((next, commands)) => {
                let record = TransitionRecord {
                    ts: event.received_at,
                    phase_from: from,
                    phase_to: next.phase,
                    event_kind: event.kind(),
                    trial_index: next.trial_index,
                    event,
                    rejected: None,
                };
                self.log_transition(record, &next)?;
                if next.awaiting != self.state.awaiting || !commands.is_empty() {
                    self.cancel_pending();
                }
                self.state = next;
                if let Some(closed) = self.state.last_closed.clone() {
                    self.close_record(closed)?;
                }
                for command in commands {
                    if let Some(event) = self.execute(command)? {
                        self.queue.push_back(event);
                    }
                }
            }
            Err(err) => {
                tracing::warn!(%err, "event rejected");
                let record = TransitionRecord {
                    ts: event.received_at,
                    phase_from: from,
                    phase_to: from,
                    event_kind: event.kind(),
                    trial_index: self.state.trial_index,
                    event,
                    rejected: Some(err.to_string()),
                };
                let state = self.state.clone();
                self.log_transition(record, &state)?;
            }
        }
        Ok(())
    }

    /// The log line is written before the new state is committed.
    fn log_transition(&mut self, record: TransitionRecord, next: &SessionState) -> Result<(), SessionError> {
        if let Some(w) = self.writer.as_mut() {
            w.log_transition(&record)?;
        }
        if let Some(o) = self.observer.as_mut() {
            o.transition(&record, next);
        }
        self.transitions.push(record);
        Ok(())
    }

    fn cancel_pending(&mut self) {
        if let Some(Pending::Speech { window: Some(window), .. }) = self.pending.take() {
            window.canceller().cancel();
        }
    }

    fn close_record(&mut self, mut record: TrialRecord) -> Result<(), SessionError> {
        for (_, a) in self.annotations.iter().filter(|(t, _)| *t == record.trial_index) {
            record.annotations.apply(a);
        }
        self.annotations.retain(|(t, _)| *t != record.trial_index);
        if let Some(w) = self.writer.as_ref() {
            w.persist(&record)?;
        }
        if let Some(o) = self.observer.as_mut() {
            o.trial(&record);
        }
        self.records.push(record);
        Ok(())
    }

    fn annotate(&mut self, input: AnnotationInput) -> Result<(), SessionError> {
        let trial = input.trial.unwrap_or(if self.state.in_trial() {
            self.state.trial_index
        } else {
            self.records.last().map_or(self.state.trial_index, |r| r.trial_index)
        });
        if let Some(record) = self.records.iter_mut().find(|r| r.trial_index == trial) {
            record.annotations.apply(&input);
            if let Some(w) = self.writer.as_ref() {
                w.persist(record)?;
            }
        } else {
            self.annotations.push((trial, input));
        }
        Ok(())
    }

    fn say(&mut self, text: &str) -> Result<(), SessionError> {
        match self.voice.speak(text, self.clock.as_ref()) {
            Ok(utterance) => self.note_utterance(&utterance),
            Err(SpeechError::EmptyText) => Ok(()),
            Err(err) => {
                tracing::warn!(%err, "speech synthesis failed");
                Ok(())
            }
        }
    }

    fn note_utterance(&mut self, utterance: &Utterance) -> Result<(), SessionError> {
        let who = match utterance.speaker {
            Speaker::Robot => "iCub",
            Speaker::Human => "Child",
        };
        if let Some(w) = self.writer.as_mut() {
            w.log_transcript(utterance.started_at, who, &utterance.text)?;
        }
        if let Some(o) = self.observer.as_mut() {
            o.utterance(utterance);
        }
        Ok(())
    }

    fn percept(&mut self, percept: Percept) {
        if let Some(o) = self.observer.as_mut() {
            o.percept(&percept);
        }
    }

    /// Logs the generative exchanges of the last call and, on a simulated
    /// transport, lets their latency pass on the session clock.
    fn flush_genai(&mut self) -> Result<(), SessionError> {
        let exchanges = self.genai.take_log();
        let latency: u64 = exchanges.iter().map(|e| e.latency_ms).sum();
        if let Some(w) = self.writer.as_mut() {
            for e in &exchanges {
                w.log_genai(e)?;
            }
        }
        if self.genai.is_simulated() {
            self.clock.sleep_ms(latency);
        }
        Ok(())
    }

    fn event(&self, body: EventBody) -> TransitionEvent {
        TransitionEvent::new(body, self.now())
    }

    fn failure(&self, failure: FailureKind, detail: impl Into<String>) -> TransitionEvent {
        self.event(EventBody::ModuleFailure {
            failure,
            detail: detail.into(),
        })
    }

    fn execute(&mut self, command: Command) -> Result<Option<TransitionEvent>, SessionError> {
        let now = self.now();
        let event = match command {
            Command::Speak { text } | Command::Greet { text } | Command::ExpressJoy { text } => {
                self.say(&text)?;
                None
            }
            Command::EnrollPartner { window_ms } => {
                self.pending = Some(Pending::Enroll {
                    deadline: now + window_ms,
                    window_ms,
                    frames: Vec::new(),
                });
                None
            }
            Command::RequestCube { slot, timeout_ms } => {
                self.held = None;
                self.pending = Some(Pending::Cube {
                    slot,
                    deadline: now + timeout_ms,
                });
                None
            }
            Command::RescanCube { slot } => Some(self.detect(slot)),
            Command::DescribeSticker { slot, cube } => {
                let cube_ref = self.cube_ref(&cube);
                let result = self.genai.describe_sticker(&cube_ref);
                self.flush_genai()?;
                Some(match result {
                    Ok(description) => self.event(EventBody::StickerDescribed { slot, description }),
                    Err(err) => self.failure(FailureKind::StickerDetection, err.to_string()),
                })
            }
            Command::GenerateSnippet {
                step,
                description,
                context,
            } => {
                let result = self
                    .genai
                    .generate_snippet(&context, step, &description, self.state.trial_index);
                self.flush_genai()?;
                Some(match result {
                    Ok(snippet) => self.event(EventBody::StorySnippetReady { snippet }),
                    Err(err) => self.failure(FailureKind::LlmFailure, err.to_string()),
                })
            }
            Command::Listen { timeout_ms } => {
                let deadline = now + timeout_ms;
                let window = match self.transcriber.open(now, deadline) {
                    Ok(w) => w,
                    Err(err) => return Ok(Some(self.failure(FailureKind::VoiceTimeout, err.to_string()))),
                };
                self.pending = Some(Pending::Speech {
                    window: Some(window),
                    deadline,
                });
                None
            }
            Command::EmitFeedback { text } => {
                self.say(&text)?;
                Some(self.event(EventBody::FeedbackDelivered { text }))
            }
            Command::Recap { transcript, elements } => {
                let result = self
                    .genai
                    .generate_recap(&transcript, &elements, self.state.trial_index);
                self.flush_genai()?;
                match result {
                    Ok(snippet) => {
                        self.say(&snippet.text)?;
                        Some(self.event(EventBody::RecapDelivered { snippet }))
                    }
                    Err(err) => Some(self.failure(FailureKind::LlmFailure, err.to_string())),
                }
            }
            Command::Recover => Some(self.event(EventBody::RecoveryComplete)),
        };
        Ok(event)
    }

    fn cube_ref(&self, cube: &HandedCube) -> CubeRef {
        let entry = self.manifest.get(&cube.ground_truth);
        CubeRef {
            sticker: cube.ground_truth.clone(),
            scene_text: entry
                .map(|e| e.description_ground_truth.clone())
                .unwrap_or_else(|| cube.ground_truth.as_str().replace('-', " ")),
            image: entry.and_then(|e| e.asset.as_ref()).map(Into::into),
        }
    }

    /// Runs detection on the held cube.
    fn detect(&mut self, slot: u8) -> TransitionEvent {
        let now = self.now();
        let Some(cube) = self.held.clone() else {
            return self.failure(FailureKind::StickerDetection, "no cube in hand");
        };
        match self.detector.detect_cube(Some(&cube), now) {
            Ok(observation) => {
                self.percept(Percept::Cube {
                    observation: observation.clone(),
                });
                if observation.confidence < self.detection_threshold {
                    return self.failure(
                        FailureKind::StickerDetection,
                        format!(
                            "low confidence {:.2} for {}",
                            observation.confidence, observation.class_label
                        ),
                    );
                }
                self.event(EventBody::CubeHandedOver {
                    slot,
                    cube: HandedCube {
                        ground_truth: cube.sticker,
                        observation,
                    },
                })
            }
            Err(PerceptionError::CubeDropped) => {
                self.held = None;
                self.failure(FailureKind::CubeDrop, "cube dropped during handover")
            }
            Err(err) => self.failure(FailureKind::StickerDetection, err.to_string()),
        }
    }

    fn wait_external(&mut self, feed: &mut dyn InputFeed) -> Result<TransitionEvent, SessionError> {
        loop {
            let Some(pending) = self.pending.as_ref() else {
                return Err(SessionError::FatalModuleLoss(format!(
                    "nothing to wait for in {} awaiting {:?}",
                    self.state.phase, self.state.awaiting
                )));
            };
            let (wants, deadline) = pending.wants();
            let ctx = FeedContext {
                deadline: Some(deadline),
                wants,
                trial_index: self.state.trial_index,
            };
            match feed.next_input(self.clock.as_ref(), &ctx) {
                FeedItem::Input(input) => {
                    if let Some(event) = self.handle_input(input)? {
                        return Ok(event);
                    }
                }
                FeedItem::Idle => {
                    if self.now() >= deadline {
                        return Ok(self.on_deadline());
                    }
                }
                FeedItem::Closed => {
                    return Err(SessionError::FatalModuleLoss(format!(
                        "input feed closed while waiting for {wants:?}"
                    )))
                }
            }
        }
    }

    fn handle_input(&mut self, input: SessionInput) -> Result<Option<TransitionEvent>, SessionError> {
        let now = self.now();
        match input {
            SessionInput::Face(frame) => {
                if let Some(Pending::Enroll { frames, .. }) = self.pending.as_mut() {
                    frames.push(frame);
                } else if let Some(model) = self.partner.as_ref() {
                    if let Ok(recognition) = recognize_partner(&frame.detections, model) {
                        self.percept(Percept::Partner { recognition });
                    }
                }
                Ok(None)
            }
            SessionInput::Gaze(fv) => {
                let label = self.gaze.classify(&fv);
                self.percept(Percept::Gaze { label, at_ms: now });
                Ok(None)
            }
            SessionInput::Cube(cube) => match self.pending {
                Some(Pending::Cube { slot, .. }) => {
                    self.held = Some(cube);
                    Ok(Some(self.detect(slot)))
                }
                _ => {
                    tracing::warn!("cube handed over while not requested; ignored");
                    Ok(None)
                }
            },
            SessionInput::Speech(text) => {
                let Some(Pending::Speech { window, deadline }) = self.pending.as_mut() else {
                    tracing::warn!("speech while not listening; ignored");
                    return Ok(None);
                };
                let deadline = *deadline;
                let Some(open) = window.take() else {
                    return Ok(None);
                };
                match open.accept(&text, now) {
                    Ok(utterance) => {
                        self.note_utterance(&utterance)?;
                        Ok(Some(self.event(EventBody::HumanSpeechFinal { utterance })))
                    }
                    Err(SpeechError::EmptyUtterance) => {
                        let reopened = self.transcriber.open(now, deadline).ok();
                        if let Some(Pending::Speech { window, .. }) = self.pending.as_mut() {
                            *window = reopened;
                        }
                        Ok(None)
                    }
                    Err(SpeechError::Timeout) => Ok(Some(self.event(EventBody::Timeout {
                        waiting_for: Awaiting::Speech,
                    }))),
                    Err(_) => Ok(None),
                }
            }
            SessionInput::Annotation(a) => {
                self.annotate(a)?;
                Ok(None)
            }
            SessionInput::Abort { reason } => Ok(Some(self.event(EventBody::Abort { reason }))),
            SessionInput::ForceRetry => Ok(Some(self.event(EventBody::ForceRetry))),
        }
    }

    fn on_deadline(&mut self) -> TransitionEvent {
        match self.pending.take() {
            Some(Pending::Enroll { window_ms, frames, .. }) => {
                match enroll_partner(&frames, window_ms, self.face_threshold) {
                    Ok(model) => {
                        let last = frames.iter().rev().find(|f| !f.detections.is_empty());
                        let recognition = last.and_then(|f| recognize_partner(&f.detections, &model).ok());
                        self.partner = Some(model);
                        match recognition {
                            Some(r) => {
                                let event = self.event(EventBody::ParticipantRecognized {
                                    track_id: r.detection.track_id(),
                                    confidence: r.confidence,
                                    fallback: r.fallback,
                                });
                                self.percept(Percept::Partner { recognition: r });
                                event
                            }
                            None => self.failure(FailureKind::Other, "no face seen"),
                        }
                    }
                    Err(err) => self.failure(FailureKind::Other, err.to_string()),
                }
            }
            Some(Pending::Cube { slot, .. }) => self.event(EventBody::Timeout {
                waiting_for: Awaiting::Cube { slot },
            }),
            Some(Pending::Speech { window, .. }) => {
                if let Some(w) = window {
                    let _ = w.expire();
                }
                self.event(EventBody::Timeout {
                    waiting_for: Awaiting::Speech,
                })
            }
            None => self.failure(FailureKind::Other, "deadline without a wait"),
        }
    }
}

/// Session metadata for a session about to start.
pub fn session_meta(cfg: &SessionConfig, mode: &str, scene: Option<String>) -> SessionMeta {
    let prompts = cfg.prompt_config();
    SessionMeta {
        participant_id: cfg.participant_id.clone(),
        trials_total: cfg.trials_total,
        mode: mode.to_string(),
        scene,
        model_name: prompts.model_name.clone(),
        describer_prompt_sha256: sha256_hex(&prompts.describer_system_prompt),
        narrator_prompt_sha256: sha256_hex(&prompts.narrator_system_prompt),
        prompt_overrides: prompts.overrides().into_iter().map(String::from).collect(),
        ended: None,
    }
}

/// Mock client for `cfg`: its fixture when one is configured, otherwise the
/// echo mock.
pub fn mock_client(cfg: &SessionConfig) -> Result<GenAiClient, ConfigError> {
    let fixture = match &cfg.genai.fixture {
        Some(path) => MockFixture::load(path).map_err(|e| ConfigError::Io {
            path: path.clone(),
            detail: e.to_string(),
        })?,
        None => MockFixture::echo(),
    };
    Ok(GenAiClient::new(cfg.prompt_config(), Box::new(MockTransport::new(fixture))))
}

/// The client `cfg` asks for: the mock, or the HTTP transport with the key
/// taken from the environment.
pub fn genai_client(cfg: &SessionConfig) -> Result<GenAiClient, ConfigError> {
    match (cfg.genai.transport, &cfg.genai.base_url) {
        (TransportKind::Live, Some(url)) => {
            let deadline = Duration::from_millis(cfg.timeouts.genai_ms);
            Ok(GenAiClient::new(cfg.prompt_config(), Box::new(HttpTransport::from_env(url.clone(), deadline))))
        }
        (TransportKind::Live, None) => Err(ConfigError::Invalid {
            field: "genai.base_url",
            detail: "required for the live transport".into(),
        }),
        (TransportKind::Mock, _) => mock_client(cfg),
    }
}

/// Runs a scene headless on a simulated clock with the mock generative
/// models. With `dir`, the session is persisted there.
pub fn replay_scene(
    base: &SessionConfig,
    scene: &Scene,
    dir: Option<&Path>,
    observer: Option<Box<dyn SessionObserver>>,
) -> Result<SessionOutcome, SessionError> {
    let mut cfg = base.clone();
    scene.settings.apply(&mut cfg);
    cfg.validate()?;
    let genai = mock_client(&cfg)?;
    let clock: Arc<dyn Clock> = Arc::new(SimClock::new());
    let mut driver = SessionDriver::new(&cfg, genai, Arc::clone(&clock))?;
    if let Some(dir) = dir {
        let meta = session_meta(&cfg, "replay", scene.name.clone());
        driver = driver.with_writer(SessionWriter::create(dir, meta)?);
    }
    if let Some(o) = observer {
        driver = driver.with_observer(o);
    }
    let mut feed = SceneFeed::new(scene.clone());
    driver.run(&mut feed)
}
