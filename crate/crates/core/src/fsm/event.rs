use serde::{Deserialize, Serialize};

use super::phase::EventKind;
use crate::genai::StickerDescription;
use crate::manifest::StickerId;
use crate::perception::CubeObservation;
use crate::speech::Utterance;
use crate::store::FailureKind;
use crate::story::{StorySnippet, StoryStep};

/// A cube that reached the robot: what was handed over and what the detector
/// made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandedCube {
    pub ground_truth: StickerId,
    pub observation: CubeObservation,
}

/// What the session is waiting for. Timeouts name the wait they end, so a
/// stale timer can never fire into a later wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "await", rename_all = "snake_case")]
pub enum Awaiting {
    Start,
    Participant,
    Cube { slot: u8 },
    Description { slot: u8 },
    Snippet { step: StoryStep },
    Speech,
    Feedback,
    Recap,
    Recovery,
    Nothing,
}

impl Awaiting {
    pub fn accepts(self, kind: EventKind) -> bool {
        use EventKind::*;
        match (self, kind) {
            (Awaiting::Start, StartSession)
            | (Awaiting::Participant, ParticipantRecognized)
            | (Awaiting::Cube { .. }, CubeHandedOver)
            | (Awaiting::Description { .. }, StickerDescribed)
            | (Awaiting::Snippet { .. }, StorySnippetReady)
            | (Awaiting::Speech, HumanSpeechFinal)
            | (Awaiting::Feedback, FeedbackDelivered)
            | (Awaiting::Recap, RecapDelivered)
            | (Awaiting::Recovery, RecoveryComplete) => true,
            (Awaiting::Start | Awaiting::Recovery | Awaiting::Nothing, _) => false,
            (_, Timeout | ModuleFailure) => true,
            _ => false,
        }
    }

    /// Waits that depend on the participant rather than on internal work.
    pub fn is_external(self) -> bool {
        matches!(self, Awaiting::Participant | Awaiting::Cube { .. } | Awaiting::Speech)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    StartSession {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        participant_id: Option<String>,
    },
    ParticipantRecognized {
        track_id: u32,
        confidence: f64,
        fallback: bool,
    },
    CubeHandedOver {
        slot: u8,
        cube: HandedCube,
    },
    StickerDescribed {
        slot: u8,
        description: StickerDescription,
    },
    StorySnippetReady {
        snippet: StorySnippet,
    },
    HumanSpeechFinal {
        utterance: Utterance,
    },
    FeedbackDelivered {
        text: String,
    },
    RecapDelivered {
        snippet: StorySnippet,
    },
    Timeout {
        waiting_for: Awaiting,
    },
    ModuleFailure {
        failure: FailureKind,
        detail: String,
    },
    RecoveryComplete,
    Abort {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    ForceRetry,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::StartSession { .. } => EventKind::StartSession,
            EventBody::ParticipantRecognized { .. } => EventKind::ParticipantRecognized,
            EventBody::CubeHandedOver { .. } => EventKind::CubeHandedOver,
            EventBody::StickerDescribed { .. } => EventKind::StickerDescribed,
            EventBody::StorySnippetReady { .. } => EventKind::StorySnippetReady,
            EventBody::HumanSpeechFinal { .. } => EventKind::HumanSpeechFinal,
            EventBody::FeedbackDelivered { .. } => EventKind::FeedbackDelivered,
            EventBody::RecapDelivered { .. } => EventKind::RecapDelivered,
            EventBody::Timeout { .. } => EventKind::Timeout,
            EventBody::ModuleFailure { .. } => EventKind::ModuleFailure,
            EventBody::RecoveryComplete => EventKind::RecoveryComplete,
            EventBody::Abort { .. } => EventKind::Abort,
            EventBody::ForceRetry => EventKind::ForceRetry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    #[serde(flatten)]
    pub body: EventBody,
    /// Session time in milliseconds.
    pub received_at: u64,
}

impl TransitionEvent {
    pub fn new(body: EventBody, received_at: u64) -> Self {
        Self { body, received_at }
    }

    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}
