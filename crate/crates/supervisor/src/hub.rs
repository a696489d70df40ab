//! The session hub: owns the one session the supervisor runs at a time,
//! keeps a snapshot of its state for the gateway, fans its events out to
//! stream subscribers and funnels console inputs into its input queue.

use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use narravine_core::config::TransportKind;
use narravine_core::fsm::{admissible, operator_admissible, Awaiting, EventKind, Phase, SessionState, TransitionRecord};
use narravine_core::scene::{Scene, SceneFeed};
use narravine_core::session::{
    genai_client, input_admissible, mock_client, session_meta, ChannelFeed, InputFeed, Percept, SessionDriver,
    SessionError, SessionInput, SessionObserver, SessionOutcome,
};
use narravine_core::speech::Utterance;
use narravine_core::store::{compute_metrics, AnnotationInput, FailureKind, Outcome, SessionWriter, TrialRecord};
use narravine_core::{Clock, ConfigError, SessionConfig, StickerManifest, WallClock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;
use tracing::{info, warn};

use crate::modules::{Demand, Modules};

const STREAM_CAPACITY: usize = 4096;

/// Per-session overrides accepted by `POST /api/session/start`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartRequest {
    pub trials_total: Option<u32>,
    pub participant_id: Option<String>,
    /// Scene script path, or "interactive".
    pub scene: Option<String>,
    pub mock_genai: Option<PathBuf>,
    pub time_scale: Option<f64>,
    pub session_dir: Option<PathBuf>,
}

impl StartRequest {
    pub fn apply(&self, cfg: &mut SessionConfig) {
        if let Some(n) = self.trials_total {
            cfg.trials_total = n;
        }
        if let Some(id) = &self.participant_id {
            cfg.participant_id = id.clone();
        }
        if let Some(scene) = &self.scene {
            cfg.scene = scene.clone();
        }
        if let Some(fixture) = &self.mock_genai {
            cfg.genai.transport = TransportKind::Mock;
            cfg.genai.fixture = Some(fixture.clone());
        }
        if let Some(scale) = self.time_scale {
            cfg.speech.time_scale = scale;
        }
        if let Some(dir) = &self.session_dir {
            cfg.session_dir = Some(dir.clone());
        }
    }
}

/// One entry of the gateway's event stream.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    SessionStarted {
        session: u64,
        mode: String,
        trials_total: u32,
        participant_id: String,
    },
    Transition {
        session: u64,
        record: TransitionRecord,
        awaiting: Awaiting,
        trial_index: u32,
    },
    Utterance {
        session: u64,
        utterance: Utterance,
    },
    Percept {
        session: u64,
        percept: Percept,
    },
    Trial {
        session: u64,
        record: TrialRecord,
    },
    SessionEnded {
        session: u64,
        summary: SessionSummary,
    },
}

impl StreamEvent {
    pub fn name(&self) -> &'static str {
        match self {
            StreamEvent::SessionStarted { .. } => "session_started",
            StreamEvent::Transition { .. } => "transition",
            StreamEvent::Utterance { .. } => "utterance",
            StreamEvent::Percept { .. } => "percept",
            StreamEvent::Trial { .. } => "trial",
            StreamEvent::SessionEnded { .. } => "session_ended",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial_index: u32,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub aborted: bool,
    pub trials: Vec<TrialSummary>,
    pub success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionSummary {
    pub fn from_outcome(out: &SessionOutcome) -> Self {
        Self {
            aborted: out.aborted,
            trials: out
                .records
                .iter()
                .map(|r| TrialSummary {
                    trial_index: r.trial_index,
                    outcome: r.outcome,
                    failure_kind: r.failure_kind,
                })
                .collect(),
            success_rate: compute_metrics(&out.records).ok().map(|m| m.success_rate),
            error: None,
        }
    }
}

/// Which console inputs would be taken right now.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InputGates {
    pub hand_cube: bool,
    pub speech_text: bool,
    pub annotation: bool,
    pub abort: bool,
    pub force_retry: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    #[serde(flatten)]
    pub state: SessionState,
    pub session: u64,
    pub running: bool,
    pub mode: Option<String>,
    /// Protocol events the current phase admits.
    pub admissible: Vec<EventKind>,
    pub inputs: InputGates,
    pub session_dir: Option<PathBuf>,
    pub summary: Option<SessionSummary>,
}

#[derive(Debug, Error)]
pub enum StartError {
    #[error("a session is already running")]
    AlreadyRunning,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

#[derive(Debug, Error, PartialEq)]
pub enum InputError {
    #[error("no session is running")]
    NoSession,
    #[error("the running session is scripted and takes no console input")]
    Scripted,
    #[error("{input} is not admissible in {phase} while awaiting {awaiting:?}")]
    Inadmissible {
        input: &'static str,
        phase: Phase,
        awaiting: Awaiting,
    },
    #[error("{input} already submitted; waiting for the session to take it")]
    InFlight { input: &'static str },
}

struct Inner {
    session: u64,
    running: bool,
    mode: Option<String>,
    state: SessionState,
    inputs: Option<mpsc::Sender<SessionInput>>,
    /// A cube or speech input was accepted and the session has not moved on.
    in_flight: bool,
    dir: Option<PathBuf>,
    summary: Option<SessionSummary>,
}

struct Shared {
    base: SessionConfig,
    manifest: StickerManifest,
    inner: Mutex<Inner>,
    idle: Condvar,
    events: broadcast::Sender<StreamEvent>,
    modules: Mutex<Option<Modules>>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn emit(&self, event: StreamEvent) {
        // No subscribers is fine.
        let _ = self.events.send(event);
    }
}

#[derive(Clone)]
pub struct Hub {
    shared: Arc<Shared>,
}

impl Hub {
    /// A hub for sessions configured from `base`. With `modules`, interactive
    /// sessions are fed by the simulated perception module over the port
    /// middleware.
    pub fn new(base: SessionConfig, modules: Option<Modules>) -> Result<Self, ConfigError> {
        let manifest = base.manifest()?;
        let (events, _) = broadcast::channel(STREAM_CAPACITY);
        let state = SessionState::new(base.trials_total, base.participant_id.clone());
        let shared = Arc::new(Shared {
            base,
            manifest,
            inner: Mutex::new(Inner {
                session: 0,
                running: false,
                mode: None,
                state,
                inputs: None,
                in_flight: false,
                dir: None,
                summary: None,
            }),
            idle: Condvar::new(),
            events,
            modules: Mutex::new(modules),
        });
        if let Some(m) = shared.modules.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let weak: Weak<Shared> = Arc::downgrade(&shared);
            m.spawn_perception(shared.base.perception.seed, move || {
                weak.upgrade().map_or(Demand::default(), |s| {
                    let inner = s.lock();
                    let interactive = inner.running && inner.inputs.is_some();
                    Demand {
                        faces: interactive && inner.state.awaiting == Awaiting::Participant,
                        gaze: interactive && inner.state.in_trial(),
                    }
                })
            });
        }
        Ok(Self { shared })
    }

    pub fn manifest(&self) -> &StickerManifest {
        &self.shared.manifest
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.shared.events.subscribe()
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.shared.lock();
        let live = inner.running && inner.inputs.is_some();
        let gate = |input: SessionInput| live && input_admissible(&inner.state, &input);
        let inputs = InputGates {
            hand_cube: gate(SessionInput::Cube(narravine_core::perception::CubePresentation::new(
                self.shared.manifest.ids().next().expect("manifest is not empty").clone(),
            ))) && !inner.in_flight,
            speech_text: gate(SessionInput::Speech(String::new())) && !inner.in_flight,
            annotation: gate(SessionInput::Annotation(AnnotationInput::default())),
            abort: live && operator_admissible(inner.state.phase),
            force_retry: live && operator_admissible(inner.state.phase),
        };
        Snapshot {
            state: inner.state.clone(),
            session: inner.session,
            running: inner.running,
            mode: inner.mode.clone(),
            admissible: admissible(inner.state.phase).to_vec(),
            inputs,
            session_dir: inner.dir.clone(),
            summary: inner.summary.clone(),
        }
    }

    pub fn is_running(&self) -> bool {
        self.shared.lock().running
    }

    /// Starts a session in the background and returns its number.
    pub fn start(&self, request: &StartRequest) -> Result<u64, StartError> {
        let mut inner = self.shared.lock();
        if inner.running {
            return Err(StartError::AlreadyRunning);
        }
        let mut cfg = self.shared.base.clone();
        request.apply(&mut cfg);
        cfg.validate()?;

        let scene = match cfg.scene_path() {
            Some(path) => {
                let scene = Scene::load(path, cfg.perception.seed).map_err(SessionError::from)?;
                scene.settings.apply(&mut cfg);
                cfg.validate()?;
                Some(scene)
            }
            None => None,
        };
        let id = inner.session + 1;
        let clock: Arc<dyn Clock> = Arc::new(WallClock::new(cfg.speech.time_scale));
        let (genai, mode) = match scene {
            Some(_) => (mock_client(&cfg)?, "scripted"),
            None => (genai_client(&cfg)?, "interactive"),
        };
        let mut driver = SessionDriver::new(&cfg, genai, Arc::clone(&clock))?;
        let dir = cfg.session_dir.as_ref().map(|base| {
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            base.join(format!("{}-{stamp}-{id}", cfg.participant_id))
        });
        if let Some(dir) = &dir {
            let meta = session_meta(&cfg, mode, scene.as_ref().and_then(|s| s.name.clone()));
            let writer = SessionWriter::create(dir, meta).map_err(SessionError::from)?;
            driver = driver.with_writer(writer);
        }
        driver = driver.with_observer(Box::new(HubObserver {
            shared: Arc::clone(&self.shared),
            session: id,
        }));

        let mut feed: Box<dyn InputFeed + Send> = match scene {
            Some(scene) => {
                inner.inputs = None;
                Box::new(SceneFeed::new(scene))
            }
            None => {
                let (tx, rx) = mpsc::channel();
                if let Some(m) = self.shared.modules.lock().unwrap_or_else(|e| e.into_inner()).as_ref() {
                    m.attach(tx.clone());
                }
                inner.inputs = Some(tx);
                Box::new(ChannelFeed::new(rx))
            }
        };
        inner.session = id;
        inner.running = true;
        inner.mode = Some(mode.to_string());
        inner.state = SessionState::new(cfg.trials_total, cfg.participant_id.clone());
        inner.in_flight = false;
        inner.dir = dir;
        inner.summary = None;
        self.shared.emit(StreamEvent::SessionStarted {
            session: id,
            mode: mode.to_string(),
            trials_total: cfg.trials_total,
            participant_id: cfg.participant_id.clone(),
        });
        drop(inner);

        info!(session = id, mode, "session started");
        let shared = Arc::clone(&self.shared);
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || {
                let result = driver.run(feed.as_mut());
                finish(&shared, id, result);
            })
            .expect("spawn session thread");
        Ok(id)
    }

    /// Hands a console input to the running session.
    pub fn submit(&self, input: SessionInput) -> Result<(), InputError> {
        let mut inner = self.shared.lock();
        if !inner.running {
            return Err(InputError::NoSession);
        }
        let Some(tx) = inner.inputs.clone() else {
            return Err(InputError::Scripted);
        };
        if !input_admissible(&inner.state, &input) {
            return Err(InputError::Inadmissible {
                input: input.name(),
                phase: inner.state.phase,
                awaiting: inner.state.awaiting,
            });
        }
        if input.is_protocol() {
            if inner.in_flight {
                return Err(InputError::InFlight { input: input.name() });
            }
            inner.in_flight = true;
        }
        tx.send(input).map_err(|_| InputError::NoSession)
    }

    /// Blocks until no session is running; false on timeout.
    pub fn wait_idle(&self, timeout: Option<Duration>) -> bool {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut inner = self.shared.lock();
        while inner.running {
            match deadline {
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return false;
                    }
                    inner = self
                        .shared
                        .idle
                        .wait_timeout(inner, d - now)
                        .unwrap_or_else(|e| e.into_inner())
                        .0;
                }
                None => inner = self.shared.idle.wait(inner).unwrap_or_else(|e| e.into_inner()),
            }
        }
        true
    }

    /// Asks a running interactive session to stop.
    pub fn shutdown(&self) {
        let _ = self.submit(SessionInput::Abort {
            reason: Some("supervisor shutdown".into()),
        });
    }
}

fn finish(shared: &Shared, id: u64, result: Result<SessionOutcome, SessionError>) {
    let summary = match &result {
        Ok(out) => SessionSummary::from_outcome(out),
        Err(e) => {
            warn!(session = id, "session ended with an error: {e}");
            SessionSummary {
                aborted: true,
                trials: Vec::new(),
                success_rate: None,
                error: Some(e.to_string()),
            }
        }
    };
    if let Some(m) = shared.modules.lock().unwrap_or_else(|e| e.into_inner()).as_ref() {
        m.detach();
    }
    {
        let mut inner = shared.lock();
        if let Ok(out) = &result {
            inner.state = out.final_state.clone();
        }
        inner.running = false;
        inner.inputs = None;
        inner.in_flight = false;
        inner.summary = Some(summary.clone());
    }
    shared.emit(StreamEvent::SessionEnded { session: id, summary });
    shared.idle.notify_all();
}

struct HubObserver {
    shared: Arc<Shared>,
    session: u64,
}

impl SessionObserver for HubObserver {
    fn transition(&mut self, record: &TransitionRecord, state: &SessionState) {
        {
            let mut inner = self.shared.lock();
            if inner.session == self.session {
                inner.state = state.clone();
                inner.in_flight = false;
            }
        }
        self.shared.emit(StreamEvent::Transition {
            session: self.session,
            record: record.clone(),
            awaiting: state.awaiting,
            trial_index: state.trial_index,
        });
    }

    fn utterance(&mut self, utterance: &Utterance) {
        self.shared.emit(StreamEvent::Utterance {
            session: self.session,
            utterance: utterance.clone(),
        });
    }

    fn percept(&mut self, percept: &Percept) {
        self.shared.emit(StreamEvent::Percept {
            session: self.session,
            percept: percept.clone(),
        });
    }

    fn trial(&mut self, record: &TrialRecord) {
        self.shared.emit(StreamEvent::Trial {
            session: self.session,
            record: record.clone(),
        });
    }
}
