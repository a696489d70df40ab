use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Introduction,
    IcubTurnOpen,
    HumanTurn,
    IcubTurnClose,
    WrapUp,
    Closure,
    FailureRecovery,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::Idle,
        Phase::Introduction,
        Phase::IcubTurnOpen,
        Phase::HumanTurn,
        Phase::IcubTurnClose,
        Phase::WrapUp,
        Phase::Closure,
        Phase::FailureRecovery,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Introduction => "Introduction",
            Phase::IcubTurnOpen => "IcubTurnOpen",
            Phase::HumanTurn => "HumanTurn",
            Phase::IcubTurnClose => "IcubTurnClose",
            Phase::WrapUp => "WrapUp",
            Phase::Closure => "Closure",
            Phase::FailureRecovery => "FailureRecovery",
        }
    }

    /// Position inside a trial, for the phases that make one up.
    pub fn trial_rank(self) -> Option<u8> {
        match self {
            Phase::IcubTurnOpen => Some(1),
            Phase::HumanTurn => Some(2),
            Phase::IcubTurnClose => Some(3),
            Phase::WrapUp => Some(4),
            _ => None,
        }
    }

    pub fn is_terminal(self) -> bool {
        self == Phase::Closure
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    StartSession,
    ParticipantRecognized,
    CubeHandedOver,
    StickerDescribed,
    StorySnippetReady,
    HumanSpeechFinal,
    FeedbackDelivered,
    RecapDelivered,
    Timeout,
    ModuleFailure,
    RecoveryComplete,
    Abort,
    ForceRetry,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::StartSession,
        EventKind::ParticipantRecognized,
        EventKind::CubeHandedOver,
        EventKind::StickerDescribed,
        EventKind::StorySnippetReady,
        EventKind::HumanSpeechFinal,
        EventKind::FeedbackDelivered,
        EventKind::RecapDelivered,
        EventKind::Timeout,
        EventKind::ModuleFailure,
        EventKind::RecoveryComplete,
        EventKind::Abort,
        EventKind::ForceRetry,
    ];
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Operator overrides, accepted in every phase between start and closure.
pub const OPERATOR_EVENTS: [EventKind; 2] = [EventKind::Abort, EventKind::ForceRetry];

/// Protocol events admissible in each phase. Operator overrides are listed
/// separately by [`operator_admissible`].
pub fn admissible(phase: Phase) -> &'static [EventKind] {
    use EventKind::*;
    match phase {
        Phase::Idle => &[StartSession],
        Phase::Introduction => &[ParticipantRecognized, Timeout, ModuleFailure],
        Phase::IcubTurnOpen => &[CubeHandedOver, Timeout, ModuleFailure],
        Phase::HumanTurn => &[
            StickerDescribed,
            StorySnippetReady,
            HumanSpeechFinal,
            CubeHandedOver,
            FeedbackDelivered,
            Timeout,
            ModuleFailure,
        ],
        Phase::IcubTurnClose => &[CubeHandedOver, StickerDescribed, StorySnippetReady, Timeout, ModuleFailure],
        Phase::WrapUp => &[RecapDelivered, Timeout, ModuleFailure],
        Phase::Closure => &[],
        Phase::FailureRecovery => &[RecoveryComplete],
    }
}

pub fn operator_admissible(phase: Phase) -> bool {
    !matches!(phase, Phase::Idle | Phase::Closure)
}
