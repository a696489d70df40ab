//! Clients for the sticker describer (a vision-language model) and the story
//! narrator (a language model). Every text leaving this module satisfies the
//! prompts' constraints: retries come first, then the text is cut down.

mod client;
mod mock;
mod prompts;
mod transport;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::StickerId;

pub use client::{Exchange, GenAiClient};
pub use mock::{MockEndpoint, MockFixture, MockReply, MockTransport, Then};
pub use prompts::{
    sha256_hex, DESCRIBER_FORBIDDEN, DESCRIBER_PROMPT_SHA256, DESCRIBER_SYSTEM_PROMPT, DESCRIPTION_MAX_WORDS,
    NARRATOR_FORBIDDEN, NARRATOR_PROMPT_SHA256, NARRATOR_SYSTEM_PROMPT,
};
pub use transport::{
    ChatMessage, ChatRequest, ChatResponse, Endpoint, HttpTransport, Role, Transport, TransportError, API_KEY_ENV,
};

/// What the describer is shown: the cube image, or a textual scene built
/// from the cube's ground-truth description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmInput {
    #[default]
    Label,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub describer_system_prompt: String,
    pub narrator_system_prompt: String,
    pub model_name: String,
    pub describer_temperature: f64,
    pub narrator_temperature: f64,
    pub max_retries: u32,
    pub vlm_input: VlmInput,
    pub deadline_ms: u64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            describer_system_prompt: DESCRIBER_SYSTEM_PROMPT.to_string(),
            narrator_system_prompt: NARRATOR_SYSTEM_PROMPT.to_string(),
            model_name: "gpt-4o".to_string(),
            describer_temperature: 0.0,
            narrator_temperature: 0.7,
            max_retries: 1,
            vlm_input: VlmInput::Label,
            deadline_ms: 30_000,
        }
    }
}

impl PromptConfig {
    /// Names of the system prompts that differ from the shipped ones.
    pub fn overrides(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if sha256_hex(&self.describer_system_prompt) != DESCRIBER_PROMPT_SHA256 {
            out.push("describer_system_prompt");
        }
        if sha256_hex(&self.narrator_system_prompt) != NARRATOR_PROMPT_SHA256 {
            out.push("narrator_system_prompt");
        }
        out
    }
}

/// The cube handed to the describer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRef {
    pub sticker: StickerId,
    /// Ground-truth description used to build the textual scene.
    pub scene_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StickerDescription {
    pub text: String,
    pub word_count: usize,
    pub source_cube: StickerId,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenAiError {
    #[error("{endpoint} unavailable after {attempts} attempts: {last}")]
    TransportFailure {
        endpoint: Endpoint,
        attempts: u32,
        last: String,
    },
    #[error("{endpoint} returned nothing usable: {detail}")]
    Unusable { endpoint: Endpoint, detail: String },
    #[error("story context violation: {0}")]
    ContextViolation(String),
    #[error("transcript is incomplete: needs opening, human turn and ending")]
    IncompleteTranscript,
}
