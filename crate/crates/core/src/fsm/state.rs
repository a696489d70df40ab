use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::event::{Awaiting, HandedCube};
use super::phase::Phase;
use crate::genai::StickerDescription;
use crate::store::{FailureKind, TrialRecord};
use crate::story::StoryTranscript;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialProgress {
    pub cubes: Vec<HandedCube>,
    pub descriptions: Vec<StickerDescription>,
    pub phases: Vec<Phase>,
    pub started_at: u64,
}

/// Where a failed trial left off and where the session continues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub failed_in: Phase,
    pub resume: Phase,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub awaiting: Awaiting,
    /// 1-based index of the current trial; 0 before the first.
    pub trial_index: u32,
    pub trials_total: u32,
    pub participant_id: String,
    #[serde(default)]
    pub partner_track: Option<u32>,
    pub retry_counts: BTreeMap<FailureKind, u32>,
    /// Turns of the current trial.
    pub transcript: StoryTranscript,
    pub trial: TrialProgress,
    #[serde(default)]
    pub recovery: Option<Recovery>,
    pub closed_trials: u32,
    /// The record of a trial closed by the step that produced this state.
    #[serde(default)]
    pub last_closed: Option<TrialRecord>,
    pub aborted: bool,
}

impl SessionState {
    pub fn new(trials_total: u32, participant_id: impl Into<String>) -> Self {
        Self {
            phase: Phase::Idle,
            awaiting: Awaiting::Start,
            trial_index: 0,
            trials_total: trials_total.max(1),
            participant_id: participant_id.into(),
            partner_track: None,
            retry_counts: BTreeMap::new(),
            transcript: StoryTranscript::new(),
            trial: TrialProgress::default(),
            recovery: None,
            closed_trials: 0,
            last_closed: None,
            aborted: false,
        }
    }

    /// True while a trial is open (between its first cube request and its
    /// close).
    pub fn in_trial(&self) -> bool {
        self.phase.trial_rank().is_some()
    }
}
