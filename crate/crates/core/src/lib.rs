//! Session supervisor for the cube storytelling protocol.
//!
//! The [`fsm`] module owns the protocol as a pure transition function; the
//! [`session`] driver feeds it events built from perception, speech and
//! generative-model results and persists everything through [`store`].

pub mod clock;
pub mod config;
pub mod fsm;
pub mod genai;
pub mod manifest;
pub mod perception;
pub mod scene;
pub mod session;
pub mod speech;
pub mod store;
pub mod story;
pub mod text;

pub use clock::{Clock, SimClock, WallClock};
pub use config::{ConfigError, SessionConfig};
pub use manifest::{StickerCategory, StickerEntry, StickerId, StickerManifest};
pub use story::{Speaker, StoryStep, StorySnippet, StoryTranscript, Turn, TurnContent};
