use serde::{Deserialize, Serialize};
use tracing::warn;

use super::transport::{ChatMessage, ChatRequest, Endpoint, Transport};
use super::{CubeRef, GenAiError, PromptConfig, StickerDescription, VlmInput};
use super::{DESCRIBER_FORBIDDEN, DESCRIPTION_MAX_WORDS, NARRATOR_FORBIDDEN};
use crate::story::{StorySnippet, StoryStep, StoryTranscript};
use crate::text::{forbidden_hits, mentions, strip_forbidden, truncate_words, word_count};

/// One request/response pair, kept verbatim for the session's GenAI log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub endpoint: Endpoint,
    pub attempt: u32,
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    pub latency_ms: u64,
    /// Text actually handed on, when it differs from the response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired: Option<String>,
}

pub struct GenAiClient {
    cfg: PromptConfig,
    transport: Box<dyn Transport>,
    log: Vec<Exchange>,
}

struct Rules<'a> {
    max_words: Option<usize>,
    forbidden: &'a [&'a str],
    required: Vec<String>,
}

impl Rules<'_> {
    fn violations(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let words = word_count(text);
        if words == 0 {
            out.push("empty".to_string());
        }
        if let Some(max) = self.max_words.filter(|&m| words > m) {
            out.push(format!("{words} words, limit {max}"));
        }
        for w in forbidden_hits(text, self.forbidden) {
            out.push(format!("forbidden word {w:?}"));
        }
        for noun in self.required.iter().filter(|n| !mentions(text, n)) {
            out.push(format!("does not mention {noun:?}"));
        }
        out
    }

    /// Forces the hard constraints; missing required mentions are tolerated.
    fn repair(&self, text: &str) -> String {
        let cleaned = strip_forbidden(text, self.forbidden);
        match self.max_words {
            Some(max) => truncate_words(&cleaned, max),
            None => cleaned,
        }
    }
}

struct Completion {
    text: String,
    latency_ms: u64,
}

impl GenAiClient {
    pub fn new(cfg: PromptConfig, transport: Box<dyn Transport>) -> Self {
        Self {
            cfg,
            transport,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &PromptConfig {
        &self.cfg
    }

    pub fn is_simulated(&self) -> bool {
        self.transport.is_simulated()
    }

    /// Exchanges since the last call, oldest first.
    pub fn take_log(&mut self) -> Vec<Exchange> {
        std::mem::take(&mut self.log)
    }

    fn request(&self, endpoint: Endpoint, user: ChatMessage) -> ChatRequest {
        let (system, temperature) = match endpoint {
            Endpoint::Describer => (&self.cfg.describer_system_prompt, self.cfg.describer_temperature),
            Endpoint::Narrator => (&self.cfg.narrator_system_prompt, self.cfg.narrator_temperature),
        };
        ChatRequest {
            endpoint,
            model: self.cfg.model_name.clone(),
            temperature,
            messages: vec![ChatMessage::system(system.clone()), user],
            deadline_ms: self.cfg.deadline_ms,
        }
    }

    /// Calls the endpoint up to `1 + max_retries` times, stopping at the first
    /// response that meets every rule. If responses arrived but none passed,
    /// the last one is repaired; if none arrived, the call fails.
    fn complete(&mut self, request: ChatRequest, rules: &Rules<'_>) -> Result<Completion, GenAiError> {
        let endpoint = request.endpoint;
        let attempts = 1 + self.cfg.max_retries;
        let mut total_latency = 0;
        let mut last_text: Option<(String, usize)> = None;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let mut ex = Exchange {
                endpoint,
                attempt,
                request: request.clone(),
                response: None,
                error: None,
                violations: Vec::new(),
                latency_ms: 0,
                repaired: None,
            };
            match self.transport.complete(&request) {
                Ok(resp) => {
                    total_latency += resp.latency_ms;
                    ex.latency_ms = resp.latency_ms;
                    let text = resp.text.trim().to_string();
                    ex.violations = rules.violations(&text);
                    ex.response = Some(resp.text);
                    let ok = ex.violations.is_empty();
                    self.log.push(ex);
                    if ok {
                        return Ok(Completion {
                            text,
                            latency_ms: total_latency,
                        });
                    }
                    last_text = Some((text, self.log.len() - 1));
                }
                Err(e) => {
                    last_error = e.to_string();
                    ex.latency_ms = request.deadline_ms.min(match e {
                        super::TransportError::Timeout { after_ms } => after_ms,
                        _ => 0,
                    });
                    total_latency += ex.latency_ms;
                    ex.error = Some(last_error.clone());
                    self.log.push(ex);
                }
            }
        }
        let Some((text, index)) = last_text else {
            return Err(GenAiError::TransportFailure {
                endpoint,
                attempts,
                last: last_error,
            });
        };
        let repaired = rules.repair(&text);
        if word_count(&repaired) == 0 {
            warn!(%endpoint, response = %text, "no usable text after repair");
            return Err(GenAiError::Unusable {
                endpoint,
                detail: format!("{text:?} is empty once constrained"),
            });
        }
        let hard = Rules {
            required: Vec::new(),
            ..*rules
        };
        if !hard.violations(&text).is_empty() {
            warn!(%endpoint, response = %text, %repaired, "response violated constraints after retries; repaired");
            self.log[index].repaired = Some(repaired.clone());
        } else {
            warn!(%endpoint, response = %text, "response misses expected content; accepted as is");
        }
        Ok(Completion {
            text: repaired,
            latency_ms: total_latency,
        })
    }

    pub fn describe_sticker(&mut self, cube: &CubeRef) -> Result<StickerDescription, GenAiError> {
        let user = match (self.cfg.vlm_input, &cube.image) {
            (VlmInput::Image, Some(path)) => ChatMessage {
                image: Some(path.display().to_string()),
                ..ChatMessage::user("What is on the cube?")
            },
            _ => ChatMessage::user(format!(
                "Scene: {}.\nWhat is on the cube?",
                cube.scene_text.trim().trim_end_matches('.')
            )),
        };
        let request = self.request(Endpoint::Describer, user);
        let rules = Rules {
            max_words: Some(DESCRIPTION_MAX_WORDS),
            forbidden: DESCRIBER_FORBIDDEN,
            required: Vec::new(),
        };
        let done = self.complete(request, &rules)?;
        Ok(StickerDescription {
            word_count: word_count(&done.text),
            text: done.text,
            source_cube: cube.sticker.clone(),
            latency_ms: done.latency_ms,
        })
    }

    /// Opening or ending of the current trial's story. `context` holds this
    /// trial's turns so far.
    pub fn generate_snippet(
        &mut self,
        context: &StoryTranscript,
        step: StoryStep,
        description: &StickerDescription,
        trial_index: u32,
    ) -> Result<StorySnippet, GenAiError> {
        let mut user = format!("Step: {}\n", step.as_str());
        match step {
            StoryStep::Opening => {
                if !context.is_empty() {
                    return Err(GenAiError::ContextViolation(format!(
                        "opening requested with {} turns already told",
                        context.len()
                    )));
                }
            }
            StoryStep::Ending => {
                if !context.has_step(StoryStep::Opening) || !context.has_human_turn() {
                    return Err(GenAiError::ContextViolation(
                        "ending requested before the opening and the child's turn".into(),
                    ));
                }
                if context.has_step(StoryStep::Ending) {
                    return Err(GenAiError::ContextViolation("the story already has an ending".into()));
                }
                user.push_str("Story so far:\n");
                for line in context.lines() {
                    user.push_str(&line);
                    user.push('\n');
                }
            }
            StoryStep::Recap => {
                return Err(GenAiError::ContextViolation("use generate_recap for the recap".into()));
            }
        }
        user.push_str(&format!("Scenario: {}", description.text));
        let request = self.request(Endpoint::Narrator, ChatMessage::user(user));
        let rules = Rules {
            max_words: step.word_limit(),
            forbidden: NARRATOR_FORBIDDEN,
            required: Vec::new(),
        };
        let done = self.complete(request, &rules)?;
        Ok(StorySnippet {
            word_count: word_count(&done.text),
            text: done.text,
            step,
            trial_index,
        })
    }

    /// Retells the trial's story. The recap should mention every element
    /// whose description named its sticker; a recap that does not is retried
    /// and, failing that, accepted with a warning.
    pub fn generate_recap(
        &mut self,
        transcript: &StoryTranscript,
        elements: &[StickerDescription],
        trial_index: u32,
    ) -> Result<StorySnippet, GenAiError> {
        if !transcript.is_complete() {
            return Err(GenAiError::IncompleteTranscript);
        }
        let mut user = String::from("Step: recap\nStory so far:\n");
        for line in transcript.lines() {
            user.push_str(&line);
            user.push('\n');
        }
        let names: Vec<String> = elements.iter().map(|d| d.text.trim_end_matches('.').to_lowercase()).collect();
        user.push_str(&format!("Elements: {}\n", names.join(", ")));
        user.push_str("Retell the whole story in a few short sentences.");
        let required = elements
            .iter()
            .map(|d| d.source_cube.head_noun().to_string())
            .filter(|noun| elements.iter().any(|d| mentions(&d.text, noun)))
            .collect();
        let request = self.request(Endpoint::Narrator, ChatMessage::user(user));
        let rules = Rules {
            max_words: None,
            forbidden: NARRATOR_FORBIDDEN,
            required,
        };
        let done = self.complete(request, &rules)?;
        Ok(StorySnippet {
            word_count: word_count(&done.text),
            text: done.text,
            step: StoryStep::Recap,
            trial_index,
        })
    }
}
