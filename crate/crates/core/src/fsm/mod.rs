//! The supervisor's protocol as a pure transition function.
//!
//! [`step`] maps a state and an event to the successor state and the side
//! effects the driver must carry out. Side effects report back by producing
//! further events, so the whole session is a fold of [`step`] over its event
//! log; [`replay_log`] re-runs that fold.

mod command;
mod config;
mod event;
mod graph;
mod log;
mod phase;
mod state;
mod step;

pub use command::Command;
pub use config::{FsmConfig, Script, Timeouts};
pub use event::{Awaiting, EventBody, HandedCube, TransitionEvent};
pub use graph::{fsm_graph, FsmEdge, FsmGraph, FsmNode};
pub use log::{parse_log, replay_log, ReplayError, TransitionRecord};
pub use phase::{admissible, operator_admissible, EventKind, Phase, OPERATOR_EVENTS};
pub use state::{Recovery, SessionState, TrialProgress};
pub use step::{accepts, step, FsmError};
