//! Named-port middleware for the storytelling supervisor and its modules.
//!
//! Ports are addressed by slash-delimited names (`/narravine/fsm/events`) and
//! resolved through an in-process [`Registry`]. A [`Node`] owns the local
//! ports, opens peer-to-peer TCP links between them, and moves
//! [`PortMessage`]s as length-prefixed JSON frames.
//!
//! Delivery is at-most-once per link. Links that drop are re-established in
//! the background with exponential backoff; callers that need retries own
//! them.

mod address;
mod error;
pub mod frame;
mod node;
mod registry;

pub use address::{PortAddress, PortName};
pub use error::PortError;
pub use frame::{Frame, FrameError, MessageKind, PortMessage, MAX_FRAME_LEN};
pub use node::{Backoff, Delivery, LinkHandle, Node, DEFAULT_CONNECT_TIMEOUT};
pub use registry::{Registry, PORT_BASE_ENV};

pub type Result<T, E = PortError> = std::result::Result<T, E>;
