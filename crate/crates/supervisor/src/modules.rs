//! Module processes wired over the port middleware. The simulated perception
//! module publishes face frames and gaze vectors on its percept ports; the
//! supervisor's inbox turns whatever arrives there into session inputs.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use narravine_core::perception::{
    BBox, CubePresentation, FaceFrame, FaceSynth, GazeFeatureVector, GazeSynth,
};
use narravine_core::session::SessionInput;
use narravine_portnet::{MessageKind, Node, PortAddress, Registry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::SupervisorError;

pub const INBOX_PORT: &str = "/narravine/supervisor/percepts";
pub const FACE_PORT: &str = "/narravine/percept/face";
pub const GAZE_PORT: &str = "/narravine/percept/gaze";
pub const CUBE_PORT: &str = "/narravine/percept/cube";

/// Payload of a percept port message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "percept", content = "data", rename_all = "snake_case")]
pub enum PerceptMessage {
    Face(FaceFrame),
    Gaze(GazeFeatureVector),
    Cube(CubePresentation),
}

impl From<PerceptMessage> for SessionInput {
    fn from(m: PerceptMessage) -> Self {
        match m {
            PerceptMessage::Face(f) => SessionInput::Face(f),
            PerceptMessage::Gaze(g) => SessionInput::Gaze(g),
            PerceptMessage::Cube(c) => SessionInput::Cube(c),
        }
    }
}

/// What the simulated perception module should be producing right now.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Demand {
    pub faces: bool,
    pub gaze: bool,
}

type Sink = Arc<Mutex<Option<Sender<SessionInput>>>>;

pub struct Modules {
    node: Arc<Node>,
    sink: Sink,
    stop: Arc<AtomicBool>,
    sim: Option<JoinHandle<()>>,
}

impl Modules {
    /// Registers the supervisor inbox and the percept ports and links them.
    /// Any bind or link failure is a boot failure.
    pub fn boot(host: &str, port_base: Option<u16>) -> Result<Self, SupervisorError> {
        let registry = port_base.map(Registry::with_port_base).unwrap_or_default();
        let node = Arc::new(Node::new(registry));
        let boot = |e: narravine_portnet::PortError| SupervisorError::ModuleBoot(e.to_string());
        node.register_port(INBOX_PORT, host, 0).map_err(boot)?;
        for port in [FACE_PORT, GAZE_PORT, CUBE_PORT] {
            node.register_port(port, host, 0).map_err(boot)?;
            node.connect(port, INBOX_PORT).map_err(boot)?;
        }
        let sink: Sink = Arc::new(Mutex::new(None));
        let forward = Arc::clone(&sink);
        node.set_handler(INBOX_PORT, move |delivery| {
            match serde_json::from_value::<PerceptMessage>(delivery.msg.payload) {
                Ok(m) => {
                    if let Some(tx) = forward.lock().unwrap_or_else(|e| e.into_inner()).as_ref() {
                        let _ = tx.send(m.into());
                    }
                }
                Err(e) => warn!(from = %delivery.from, "undecodable percept: {e}"),
            }
        })
        .map_err(boot)?;
        Ok(Self {
            node,
            sink,
            stop: Arc::new(AtomicBool::new(false)),
            sim: None,
        })
    }

    /// Routes inbox deliveries to a session's input channel.
    pub fn attach(&self, tx: Sender<SessionInput>) {
        *self.sink.lock().unwrap_or_else(|e| e.into_inner()) = Some(tx);
    }

    pub fn detach(&self) {
        *self.sink.lock().unwrap_or_else(|e| e.into_inner()) = None;
    }

    pub fn publish(&self, msg: &PerceptMessage) -> usize {
        let port = match msg {
            PerceptMessage::Face(_) => FACE_PORT,
            PerceptMessage::Gaze(_) => GAZE_PORT,
            PerceptMessage::Cube(_) => CUBE_PORT,
        };
        let payload = serde_json::to_value(msg).expect("percepts serialize");
        self.node.publish(port, MessageKind::Stream, payload).unwrap_or(0)
    }

    pub fn ports(&self) -> Vec<PortAddress> {
        self.node.registry().live()
    }

    /// Starts the simulated participant: a large partner face with a small
    /// bystander behind, published at 10 Hz while faces are wanted, and a
    /// gaze sample every tenth frame during trials. Frame stamps are in
    /// session time; the real tick is shorter so enrollment is never starved.
    pub fn spawn_perception(&mut self, seed: u64, demand: impl Fn() -> Demand + Send + 'static) {
        let node = Arc::clone(&self.node);
        let stop = Arc::clone(&self.stop);
        let handle = std::thread::spawn(move || {
            let faces = FaceSynth::new(seed);
            let gaze = GazeSynth::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let partner = BBox::new(220.0, 100.0, 160.0, 200.0);
            let bystander = BBox::new(40.0, 150.0, 60.0, 80.0);
            let tick = Duration::from_millis(20);
            let mut frame = 0u64;
            while !stop.load(Ordering::Relaxed) {
                let want = demand();
                if want.faces {
                    let detections = [(1, partner), (2, bystander)]
                        .into_iter()
                        .filter_map(|(id, bbox)| faces.detection(id, bbox, frame).ok())
                        .collect();
                    let msg = PerceptMessage::Face(FaceFrame {
                        at_ms: frame * 100,
                        detections,
                    });
                    let _ = node.publish(FACE_PORT, MessageKind::Stream, serde_json::to_value(msg).expect("serializes"));
                }
                if want.gaze && frame.is_multiple_of(10) {
                    let yaw = if frame.is_multiple_of(30) { 60.0 } else { 5.0 };
                    let fv = gaze.render(yaw, (300.0, 200.0), 60.0, &mut rng).to_vector();
                    let msg = PerceptMessage::Gaze(fv);
                    let _ = node.publish(GAZE_PORT, MessageKind::Stream, serde_json::to_value(msg).expect("serializes"));
                }
                frame += 1;
                std::thread::sleep(tick);
            }
        });
        self.sim = Some(handle);
    }
}

impl Drop for Modules {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.sim.take() {
            let _ = h.join();
        }
        for port in [FACE_PORT, GAZE_PORT, CUBE_PORT, INBOX_PORT] {
            let _ = self.node.deregister(port);
        }
    }
}
