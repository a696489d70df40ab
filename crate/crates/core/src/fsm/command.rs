use serde::{Deserialize, Serialize};

use super::event::HandedCube;
use crate::genai::StickerDescription;
use crate::story::{StoryStep, StoryTranscript};

/// Side effects requested by a transition. Each completes by producing an
/// event, except `Speak`, `Greet` and `ExpressJoy`, which only take time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Speak {
        text: String,
    },
    /// Collect face frames for the enrollment window, then recognize.
    EnrollPartner {
        window_ms: u64,
    },
    RequestCube {
        slot: u8,
        timeout_ms: u64,
    },
    /// Run detection again on the cube currently held.
    RescanCube {
        slot: u8,
    },
    DescribeSticker {
        slot: u8,
        cube: HandedCube,
    },
    GenerateSnippet {
        step: StoryStep,
        description: StickerDescription,
        context: StoryTranscript,
    },
    Listen {
        timeout_ms: u64,
    },
    EmitFeedback {
        text: String,
    },
    Recap {
        transcript: StoryTranscript,
        elements: Vec<StickerDescription>,
    },
    Greet {
        text: String,
    },
    ExpressJoy {
        text: String,
    },
    /// Acknowledge the failed trial so the session can resume.
    Recover,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Speak { .. } => "speak",
            Command::EnrollPartner { .. } => "enroll_partner",
            Command::RequestCube { .. } => "request_cube",
            Command::RescanCube { .. } => "rescan_cube",
            Command::DescribeSticker { .. } => "describe_sticker",
            Command::GenerateSnippet { .. } => "generate_snippet",
            Command::Listen { .. } => "listen",
            Command::EmitFeedback { .. } => "emit_feedback",
            Command::Recap { .. } => "recap",
            Command::Greet { .. } => "greet",
            Command::ExpressJoy { .. } => "express_joy",
            Command::Recover => "recover",
        }
    }
}
