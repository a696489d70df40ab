use serde::{Deserialize, Serialize};

use crate::manifest::StickerId;
use crate::speech::Utterance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Robot,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoryStep {
    Opening,
    Ending,
    Recap,
}

impl StoryStep {
    pub fn as_str(self) -> &'static str {
        match self {
            StoryStep::Opening => "opening",
            StoryStep::Ending => "ending",
            StoryStep::Recap => "recap",
        }
    }

    /// Word limit for generated text at this step; the recap has none.
    pub fn word_limit(self) -> Option<usize> {
        match self {
            StoryStep::Opening | StoryStep::Ending => Some(15),
            StoryStep::Recap => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySnippet {
    pub text: String,
    pub word_count: usize,
    pub step: StoryStep,
    pub trial_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnContent {
    Snippet(StorySnippet),
    Utterance(Utterance),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub content: TurnContent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<StickerId>,
}

impl Turn {
    pub fn robot(snippet: StorySnippet, cube: Option<StickerId>) -> Self {
        Self {
            speaker: Speaker::Robot,
            content: TurnContent::Snippet(snippet),
            cube,
        }
    }

    pub fn human(utterance: Utterance, cube: Option<StickerId>) -> Self {
        Self {
            speaker: Speaker::Human,
            content: TurnContent::Utterance(utterance),
            cube,
        }
    }

    pub fn text(&self) -> &str {
        match &self.content {
            TurnContent::Snippet(s) => &s.text,
            TurnContent::Utterance(u) => &u.text,
        }
    }

    pub fn step(&self) -> Option<StoryStep> {
        match &self.content {
            TurnContent::Snippet(s) => Some(s.step),
            TurnContent::Utterance(_) => None,
        }
    }
}

/// Ordered turns of one trial's story. A completed trial reads
/// robot-opening, human, robot-ending, robot-recap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryTranscript {
    pub turns: Vec<Turn>,
}

impl StoryTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, turn: Turn) {
        self.turns.push(turn);
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn has_step(&self, step: StoryStep) -> bool {
        self.turns.iter().any(|t| t.step() == Some(step))
    }

    pub fn has_human_turn(&self) -> bool {
        self.turns.iter().any(|t| t.speaker == Speaker::Human)
    }

    /// Opening, human turn and ending are all present.
    pub fn is_complete(&self) -> bool {
        self.has_step(StoryStep::Opening) && self.has_human_turn() && self.has_step(StoryStep::Ending)
    }

    /// The cubes referenced by turns, in order, without repeats.
    pub fn cubes(&self) -> Vec<&StickerId> {
        let mut out: Vec<&StickerId> = Vec::new();
        for c in self.turns.iter().filter_map(|t| t.cube.as_ref()) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Turns as `speaker: text` lines, in order.
    pub fn lines(&self) -> Vec<String> {
        self.turns
            .iter()
            .map(|t| {
                let who = match t.speaker {
                    Speaker::Robot => "iCub",
                    Speaker::Human => "Child",
                };
                format!("{who}: {}", t.text())
            })
            .collect()
    }
}
