//! Deterministic transport driven by a fixture document:
//!
//! ```json
//! { "seed": 7, "latency_ms": 400,
//!   "describer": { "responses": ["A grey smiling koala", {"error": "unavailable"}], "then": "echo" },
//!   "narrator": { "then": "echo" } }
//! ```
//!
//! Each endpoint plays its canned responses in order, then follows `then`:
//! `echo` derives a reply from the request, `fail` reports the service as
//! unavailable, `repeat_last` replays the final canned entry and `cycle`
//! starts over.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::transport::{ChatRequest, ChatResponse, Endpoint, Transport, TransportError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Then {
    #[default]
    Echo,
    Fail,
    RepeatLast,
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Error { error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEndpoint {
    #[serde(default)]
    pub responses: Vec<MockReply>,
    #[serde(default)]
    pub then: Then,
    #[serde(default)]
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub describer: MockEndpoint,
    #[serde(default)]
    pub narrator: MockEndpoint,
}

impl MockFixture {
    pub fn echo() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[derive(Debug, Clone)]
pub struct MockTransport {
    fixture: MockFixture,
    served: [usize; 2],
}

fn slot(endpoint: Endpoint) -> usize {
    match endpoint {
        Endpoint::Describer => 0,
        Endpoint::Narrator => 1,
    }
}

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn field<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(name)).map(str::trim)
}

fn lower_first(s: &str) -> String {
    let s = s.trim().trim_end_matches('.');
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl MockTransport {
    pub fn new(fixture: MockFixture) -> Self {
        Self {
            fixture,
            served: [0; 2],
        }
    }

    pub fn echo() -> Self {
        Self::new(MockFixture::echo())
    }

    fn endpoint(&self, e: Endpoint) -> &MockEndpoint {
        match e {
            Endpoint::Describer => &self.fixture.describer,
            Endpoint::Narrator => &self.fixture.narrator,
        }
    }

    fn echo_reply(&self, request: &ChatRequest) -> String {
        let user = request.last_user();
        let pick = |options: &[&str]| options[(fnv1a(self.fixture.seed, user) % options.len() as u64) as usize].to_string();
        match request.endpoint {
            Endpoint::Describer => match field(user, "Scene:") {
                Some(scene) => scene.trim_end_matches('.').to_string(),
                None => "A colorful object".to_string(),
            },
            Endpoint::Narrator => {
                let scenario = lower_first(field(user, "Scenario:").unwrap_or("a little friend"));
                match field(user, "Step:") {
                    Some("opening") => pick(&["Once upon a time, {}.", "Long ago there lived {}.", "One sunny morning, {} appeared."])
                        .replace("{}", &scenario),
                    Some("ending") => pick(&["Finally, {} made everyone happy.", "In the end, {} saved the day."])
                        .replace("{}", &scenario),
                    _ => {
                        let story: Vec<&str> = user
                            .lines()
                            .filter_map(|l| l.split_once(": ").filter(|(who, _)| *who == "iCub" || *who == "Child"))
                            .map(|(_, said)| said.trim())
                            .collect();
                        let elements = field(user, "Elements:").unwrap_or("");
                        format!("Our story: {} It featured {}.", story.join(" "), elements.trim_end_matches('.'))
                    }
                }
            }
        }
    }

    fn error(kind: &str, request: &ChatRequest) -> TransportError {
        match kind {
            "timeout" => TransportError::Timeout {
                after_ms: request.deadline_ms,
            },
            "malformed" => TransportError::Malformed {
                detail: "scripted malformed reply".into(),
            },
            other => match other.strip_prefix("status:").and_then(|c| c.parse().ok()) {
                Some(code) => TransportError::Status {
                    code,
                    body: "scripted error".into(),
                },
                None => TransportError::Unavailable {
                    detail: format!("scripted {other}"),
                },
            },
        }
    }
}

impl Transport for MockTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let i = slot(request.endpoint);
        let n = self.served[i];
        self.served[i] += 1;
        let ep = self.endpoint(request.endpoint);
        let latency_ms = ep.latency_ms.unwrap_or(self.fixture.latency_ms);
        let canned = ep.responses.len();
        let reply = if n < canned {
            Some(ep.responses[n].clone())
        } else {
            match ep.then {
                Then::Echo => None,
                Then::Fail => Some(MockReply::Error {
                    error: "unavailable".into(),
                }),
                Then::RepeatLast if canned > 0 => Some(ep.responses[canned - 1].clone()),
                Then::Cycle if canned > 0 => Some(ep.responses[n % canned].clone()),
                Then::RepeatLast | Then::Cycle => None,
            }
        };
        if latency_ms > request.deadline_ms {
            return Err(TransportError::Timeout {
                after_ms: request.deadline_ms,
            });
        }
        match reply {
            Some(MockReply::Error { error }) => Err(Self::error(&error, request)),
            Some(MockReply::Text(text)) => Ok(ChatResponse { text, latency_ms }),
            None => Ok(ChatResponse {
                text: self.echo_reply(request),
                latency_ms,
            }),
        }
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::super::transport::ChatMessage;
    use super::*;

    fn req(endpoint: Endpoint, user: &str) -> ChatRequest {
        ChatRequest {
            endpoint,
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage::system("s"), ChatMessage::user(user)],
            deadline_ms: 30_000,
        }
    }

    #[test]
    fn canned_then_fallback() {
        let fixture = MockFixture::from_json(
            r#"{"describer": {"responses": ["A grey smiling koala", {"error": "timeout"}], "then": "fail"}}"#,
        )
        .unwrap();
        let mut t = MockTransport::new(fixture);
        let r = req(Endpoint::Describer, "Scene: A koala.");
        assert_eq!(t.complete(&r).unwrap().text, "A grey smiling koala");
        assert!(matches!(t.complete(&r), Err(TransportError::Timeout { .. })));
        assert!(matches!(t.complete(&r), Err(TransportError::Unavailable { .. })));
        assert!(!t.complete(&req(Endpoint::Narrator, "Step: opening\nScenario: A fox")).unwrap().text.is_empty());
    }

    #[test]
    fn echo_follows_the_request() {
        let mut t = MockTransport::echo();
        let d = t.complete(&req(Endpoint::Describer, "Scene: A mushroom house with red roof.\nWhat is on the cube?"));
        assert_eq!(d.unwrap().text, "A mushroom house with red roof");
        let o = t.complete(&req(Endpoint::Narrator, "Step: opening\nScenario: A mushroom house with red roof")).unwrap();
        assert!(o.text.contains("a mushroom house with red roof"), "{}", o.text);
        let r = t
            .complete(&req(
                Endpoint::Narrator,
                "Step: recap\nStory so far:\niCub: Hi.\nChild: Ho.\nElements: a castle, an alien, a koala",
            ))
            .unwrap();
        assert_eq!(r.text, "Our story: Hi. Ho. It featured a castle, an alien, a koala.");
    }

    #[test]
    fn repeat_and_cycle() {
        let mut t = MockTransport::new(
            MockFixture::from_json(r#"{"narrator": {"responses": ["a", "b"], "then": "cycle"}, "describer": {"responses": ["x"], "then": "repeat_last"}}"#)
                .unwrap(),
        );
        let n = req(Endpoint::Narrator, "");
        let got: Vec<String> = (0..5).map(|_| t.complete(&n).unwrap().text).collect();
        assert_eq!(got, ["a", "b", "a", "b", "a"]);
        let d = req(Endpoint::Describer, "");
        assert_eq!(t.complete(&d).unwrap().text, "x");
        assert_eq!(t.complete(&d).unwrap().text, "x");
    }

    #[test]
    fn latency_beyond_deadline_times_out() {
        let mut t = MockTransport::new(MockFixture {
            latency_ms: 31_000,
            ..MockFixture::default()
        });
        assert!(matches!(
            t.complete(&req(Endpoint::Describer, "Scene: x")),
            Err(TransportError::Timeout { after_ms: 30_000 })
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(MockFixture::from_json(r#"{"describr": {}}"#).is_err());
    }
}
