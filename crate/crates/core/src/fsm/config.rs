use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timeouts {
    /// Length of the partner enrollment window.
    pub enrollment_ms: u64,
    pub cube_ms: u64,
    pub speech_ms: u64,
    pub genai_ms: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            enrollment_ms: 5_000,
            cube_ms: 60_000,
            speech_ms: 90_000,
            genai_ms: 30_000,
        }
    }
}

/// What the robot says outside the generated story. Editable; none of it is
/// canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Script {
    pub introduction: String,
    pub briefing: String,
    pub ask_second_cube: String,
    pub ask_final_cube: String,
    pub next_trial: String,
    pub reprompt: String,
    pub ask_cube_again: String,
    pub cube_dropped: String,
    pub apology: String,
    pub greeting: String,
    pub joy: String,
    pub farewell: String,
    /// Positive feedback after the child's turn; `{element}` is replaced by
    /// the description of the child's cube.
    pub feedback: Vec<String>,
}

impl Default for Script {
    fn default() -> Self {
        let s = |t: &str| t.to_string();
        Self {
            introduction: s("Hello! I am iCub. Today we will invent stories together."),
            briefing: s("Please choose a cube and give it to me, and I will start our story."),
            ask_second_cube: s("Lovely! Now give me the cube you used."),
            ask_final_cube: s("Now choose the last cube and give it to me, and I will finish the story."),
            next_trial: s("Let's invent another story! Please give me a new cube."),
            reprompt: s("I could not hear you. Can you tell me how the story goes on?"),
            ask_cube_again: s("I am waiting for a cube. Can you give it to me?"),
            cube_dropped: s("Oops, the cube fell. Can you give it to me again?"),
            apology: s("Sorry, something went wrong with this story. Let's move on."),
            greeting: s("Thank you for playing with me! Goodbye!"),
            joy: s("That was so much fun!"),
            farewell: s("We have to stop here. Thank you, goodbye!"),
            feedback: vec![
                s("What a great idea!"),
                s("I love {element} in our story!"),
                s("Wonderful, you are a great storyteller!"),
                s("Wow, {element}! That is fantastic!"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmConfig {
    pub trials_total: u32,
    /// Retries per failure kind within one trial.
    pub max_retries: u32,
    pub timeouts: Timeouts,
    pub script: Script,
    /// Seed for the choice of feedback sentence.
    pub feedback_seed: u64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            trials_total: 3,
            max_retries: 2,
            timeouts: Timeouts::default(),
            script: Script::default(),
            feedback_seed: 7,
        }
    }
}
