use thiserror::Error;

use super::command::Command;
use super::config::FsmConfig;
use super::event::{Awaiting, EventBody, TransitionEvent};
use super::phase::{admissible, operator_admissible, EventKind, Phase};
use super::state::{Recovery, SessionState, TrialProgress};
use crate::store::{Annotations, FailureKind, Outcome, TrialRecord};
use crate::story::{StoryStep, StoryTranscript, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("{event} is not accepted in {phase} while awaiting {awaiting:?}")]
    IllegalTransition {
        phase: Phase,
        awaiting: Awaiting,
        event: EventKind,
    },
}

/// Whether `event` is legal in `state`: admissible in the phase, answering
/// the current wait, and carrying a payload that matches it.
pub fn accepts(state: &SessionState, event: &TransitionEvent) -> bool {
    let kind = event.kind();
    match &event.body {
        EventBody::Abort { .. } | EventBody::ForceRetry => return operator_admissible(state.phase),
        _ => {}
    }
    if !admissible(state.phase).contains(&kind) || !state.awaiting.accepts(kind) {
        return false;
    }
    match (&event.body, state.awaiting) {
        (EventBody::CubeHandedOver { slot, .. }, Awaiting::Cube { slot: want }) => *slot == want,
        (EventBody::StickerDescribed { slot, .. }, Awaiting::Description { slot: want }) => {
            *slot == want && state.trial.cubes.len() > usize::from(*slot)
        }
        (EventBody::StorySnippetReady { snippet }, Awaiting::Snippet { step }) => snippet.step == step,
        (EventBody::RecapDelivered { snippet }, _) => snippet.step == StoryStep::Recap,
        (EventBody::Timeout { waiting_for }, current) => *waiting_for == current,
        _ => true,
    }
}

/// The protocol transition function. Pure: the successor is a function of
/// the inputs alone.
pub fn step(
    state: &SessionState,
    event: &TransitionEvent,
    cfg: &FsmConfig,
) -> Result<(SessionState, Vec<Command>), FsmError> {
    if !accepts(state, event) {
        return Err(FsmError::IllegalTransition {
            phase: state.phase,
            awaiting: state.awaiting,
            event: event.kind(),
        });
    }
    let mut s = state.clone();
    s.last_closed = None;
    let now = event.received_at;
    let t = &cfg.timeouts;
    let script = &cfg.script;
    let say = |text: &str| Command::Speak { text: text.to_string() };

    let commands = match &event.body {
        EventBody::StartSession { participant_id } => {
            if let Some(id) = participant_id {
                s.participant_id = id.clone();
            }
            s.phase = Phase::Introduction;
            s.awaiting = Awaiting::Participant;
            vec![
                say(&script.introduction),
                Command::EnrollPartner {
                    window_ms: t.enrollment_ms,
                },
            ]
        }
        EventBody::ParticipantRecognized { track_id, .. } => {
            s.partner_track = Some(*track_id);
            begin_trial(&mut s, 1, now);
            vec![say(&script.briefing), request_cube(0, cfg)]
        }
        EventBody::CubeHandedOver { slot, cube } => {
            s.trial.cubes.push(cube.clone());
            if *slot == 0 {
                set_phase(&mut s, Phase::HumanTurn);
            }
            if *slot == 1 {
                if let Some(turn) = s.transcript.turns.iter_mut().rev().find(|t| t.step().is_none()) {
                    turn.cube = Some(cube.ground_truth.clone());
                }
            }
            s.awaiting = Awaiting::Description { slot: *slot };
            vec![Command::DescribeSticker {
                slot: *slot,
                cube: cube.clone(),
            }]
        }
        EventBody::StickerDescribed { slot, description } => {
            s.trial.descriptions.push(description.clone());
            match slot {
                0 => {
                    s.awaiting = Awaiting::Snippet {
                        step: StoryStep::Opening,
                    };
                    vec![generate(&s, StoryStep::Opening)]
                }
                1 => {
                    s.awaiting = Awaiting::Feedback;
                    vec![Command::EmitFeedback {
                        text: feedback_text(&s, cfg),
                    }]
                }
                _ => {
                    s.awaiting = Awaiting::Snippet {
                        step: StoryStep::Ending,
                    };
                    vec![generate(&s, StoryStep::Ending)]
                }
            }
        }
        EventBody::StorySnippetReady { snippet } => {
            let slot = if snippet.step == StoryStep::Opening { 0 } else { 2 };
            let cube = s.trial.cubes.get(slot).map(|c| c.ground_truth.clone());
            s.transcript.push(Turn::robot(snippet.clone(), cube));
            if snippet.step == StoryStep::Opening {
                s.awaiting = Awaiting::Speech;
                vec![
                    say(&snippet.text),
                    Command::Listen {
                        timeout_ms: t.speech_ms,
                    },
                ]
            } else {
                set_phase(&mut s, Phase::WrapUp);
                s.awaiting = Awaiting::Recap;
                vec![say(&snippet.text), recap(&s)]
            }
        }
        EventBody::HumanSpeechFinal { utterance } => {
            s.transcript.push(Turn::human(utterance.clone(), None));
            s.awaiting = Awaiting::Cube { slot: 1 };
            vec![say(&script.ask_second_cube), request_cube(1, cfg)]
        }
        EventBody::FeedbackDelivered { .. } => {
            set_phase(&mut s, Phase::IcubTurnClose);
            s.awaiting = Awaiting::Cube { slot: 2 };
            vec![say(&script.ask_final_cube), request_cube(2, cfg)]
        }
        EventBody::RecapDelivered { snippet } => {
            s.transcript.push(Turn::robot(snippet.clone(), None));
            close_trial(&mut s, Outcome::Success, None, now);
            if s.trial_index < s.trials_total {
                let next = s.trial_index + 1;
                begin_trial(&mut s, next, now);
                vec![say(&script.next_trial), request_cube(0, cfg)]
            } else {
                close_session(&mut s);
                vec![
                    Command::Greet {
                        text: script.greeting.clone(),
                    },
                    Command::ExpressJoy {
                        text: script.joy.clone(),
                    },
                ]
            }
        }
        EventBody::Timeout { waiting_for } => {
            let kind = timeout_kind(*waiting_for);
            on_failure(&mut s, kind, cfg, now)
        }
        EventBody::ModuleFailure { failure, .. } => on_failure(&mut s, *failure, cfg, now),
        EventBody::RecoveryComplete => {
            let recovery = s.recovery.take().expect("recovery state is set while awaiting recovery");
            if recovery.resume == Phase::IcubTurnOpen {
                let next = s.trial_index + 1;
                begin_trial(&mut s, next, now);
                let opener = if next == 1 { &script.briefing } else { &script.next_trial };
                vec![say(opener), request_cube(0, cfg)]
            } else {
                close_session(&mut s);
                vec![
                    Command::Greet {
                        text: script.greeting.clone(),
                    },
                    Command::ExpressJoy {
                        text: script.joy.clone(),
                    },
                ]
            }
        }
        EventBody::Abort { .. } => {
            if s.in_trial() {
                close_trial(&mut s, Outcome::Aborted, None, now);
            }
            s.recovery = None;
            s.aborted = true;
            close_session(&mut s);
            vec![say(&script.farewell)]
        }
        EventBody::ForceRetry => reissue(&s, None, cfg),
    };
    Ok((s, commands))
}

fn request_cube(slot: u8, cfg: &FsmConfig) -> Command {
    Command::RequestCube {
        slot,
        timeout_ms: cfg.timeouts.cube_ms,
    }
}

fn set_phase(s: &mut SessionState, phase: Phase) {
    s.phase = phase;
    if phase.trial_rank().is_some() && s.trial.phases.last() != Some(&phase) {
        s.trial.phases.push(phase);
    }
}

fn begin_trial(s: &mut SessionState, index: u32, now: u64) {
    s.trial_index = index;
    s.trial = TrialProgress {
        started_at: now,
        ..TrialProgress::default()
    };
    s.transcript = StoryTranscript::new();
    s.retry_counts.clear();
    set_phase(s, Phase::IcubTurnOpen);
    s.awaiting = Awaiting::Cube { slot: 0 };
}

fn close_session(s: &mut SessionState) {
    s.phase = Phase::Closure;
    s.awaiting = Awaiting::Nothing;
}

fn close_trial(s: &mut SessionState, outcome: Outcome, failure_kind: Option<FailureKind>, now: u64) {
    let trial = std::mem::take(&mut s.trial);
    let record = TrialRecord {
        trial_index: s.trial_index,
        cube_sequence: trial.cubes.iter().map(|c| c.ground_truth.clone()).collect(),
        observations: trial.cubes.iter().map(|c| c.observation.clone()).collect(),
        vlm_descriptions: trial.descriptions,
        transcript: std::mem::take(&mut s.transcript),
        outcome,
        failure_kind,
        annotations: Annotations::default(),
        phases: trial.phases,
        started_at: trial.started_at,
        ended_at: now.max(trial.started_at),
    };
    s.closed_trials += 1;
    s.last_closed = Some(record);
}

fn generate(s: &SessionState, step: StoryStep) -> Command {
    let (index, context) = match step {
        StoryStep::Opening => (0, StoryTranscript::new()),
        _ => (2, s.transcript.clone()),
    };
    Command::GenerateSnippet {
        step,
        description: s.trial.descriptions[index].clone(),
        context,
    }
}

fn recap(s: &SessionState) -> Command {
    Command::Recap {
        transcript: s.transcript.clone(),
        elements: s.trial.descriptions.clone(),
    }
}

/// Picks a feedback sentence from the seed and trial index, so a replay says
/// the same thing.
fn feedback_text(s: &SessionState, cfg: &FsmConfig) -> String {
    let templates = &cfg.script.feedback;
    if templates.is_empty() {
        return "Well done!".to_string();
    }
    let mut x = cfg.feedback_seed ^ u64::from(s.trial_index).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    let template = &templates[(x % templates.len() as u64) as usize];
    let element = s
        .trial
        .descriptions
        .get(1)
        .map(|d| d.text.trim_end_matches('.').to_lowercase())
        .unwrap_or_else(|| "your idea".to_string());
    template.replace("{element}", &element)
}

fn timeout_kind(waiting_for: Awaiting) -> FailureKind {
    match waiting_for {
        Awaiting::Description { .. } => FailureKind::StickerDetection,
        Awaiting::Snippet { .. } | Awaiting::Recap => FailureKind::LlmFailure,
        Awaiting::Speech => FailureKind::VoiceTimeout,
        _ => FailureKind::Other,
    }
}

fn on_failure(s: &mut SessionState, kind: FailureKind, cfg: &FsmConfig, now: u64) -> Vec<Command> {
    let count = s.retry_counts.entry(kind).or_insert(0);
    if *count < cfg.max_retries {
        *count += 1;
        return reissue(s, Some(kind), cfg);
    }
    let failed_in = s.phase;
    let resume = if s.in_trial() {
        close_trial(s, Outcome::Failed, Some(kind), now);
        if s.trial_index < s.trials_total {
            Phase::IcubTurnOpen
        } else {
            Phase::Closure
        }
    } else {
        Phase::IcubTurnOpen
    };
    s.recovery = Some(Recovery {
        failed_in,
        resume,
        kind,
    });
    s.phase = Phase::FailureRecovery;
    s.awaiting = Awaiting::Recovery;
    vec![
        Command::Speak {
            text: cfg.script.apology.clone(),
        },
        Command::Recover,
    ]
}

/// Issues again whatever the current wait is waiting on.
fn reissue(s: &SessionState, kind: Option<FailureKind>, cfg: &FsmConfig) -> Vec<Command> {
    let script = &cfg.script;
    let say = |text: &str| Command::Speak { text: text.to_string() };
    match s.awaiting {
        Awaiting::Participant => vec![Command::EnrollPartner {
            window_ms: cfg.timeouts.enrollment_ms,
        }],
        Awaiting::Cube { slot } => match kind {
            Some(FailureKind::StickerDetection) => vec![Command::RescanCube { slot }],
            Some(FailureKind::CubeDrop) => vec![say(&script.cube_dropped), request_cube(slot, cfg)],
            _ => vec![say(&script.ask_cube_again), request_cube(slot, cfg)],
        },
        Awaiting::Description { slot } => vec![Command::DescribeSticker {
            slot,
            cube: s.trial.cubes[usize::from(slot)].clone(),
        }],
        Awaiting::Snippet { step } => vec![generate(s, step)],
        Awaiting::Speech => vec![
            say(&script.reprompt),
            Command::Listen {
                timeout_ms: cfg.timeouts.speech_ms,
            },
        ],
        Awaiting::Feedback => vec![Command::EmitFeedback {
            text: feedback_text(s, cfg),
        }],
        Awaiting::Recap => vec![recap(s)],
        Awaiting::Recovery => vec![Command::Recover],
        Awaiting::Start | Awaiting::Nothing => Vec::new(),
    }
}
