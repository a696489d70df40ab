use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::FsmConfig;
use super::event::TransitionEvent;
use super::phase::{EventKind, Phase};
use super::state::SessionState;
use super::step::{step, FsmError};

/// One line of `fsm.log`. Rejected events are logged with the reason and
/// leave the phase unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub ts: u64,
    pub phase_from: Phase,
    pub phase_to: Phase,
    pub event_kind: EventKind,
    pub trial_index: u32,
    pub event: TransitionEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

impl TransitionRecord {
    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("entry {index}: {source}")]
    Step { index: usize, source: FsmError },
    #[error("entry {index}: logged {logged} but replay reached {replayed}")]
    Divergence {
        index: usize,
        logged: Phase,
        replayed: Phase,
    },
}

/// Parses a whole `fsm.log`, skipping blank lines.
pub fn parse_log(text: &str) -> Result<Vec<TransitionRecord>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            TransitionRecord::parse_line(l).map_err(|e| ReplayError::Parse {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Re-applies the accepted entries of a log to `initial` and checks each
/// lands where the log says it did.
pub fn replay_log(
    initial: SessionState,
    records: &[TransitionRecord],
    cfg: &FsmConfig,
) -> Result<SessionState, ReplayError> {
    let mut state = initial;
    for (index, rec) in records.iter().enumerate() {
        if rec.rejected.is_some() {
            continue;
        }
        let (next, _) = step(&state, &rec.event, cfg).map_err(|source| ReplayError::Step { index, source })?;
        if next.phase != rec.phase_to {
            return Err(ReplayError::Divergence {
                index,
                logged: rec.phase_to,
                replayed: next.phase,
            });
        }
        state = next;
    }
    Ok(state)
}
