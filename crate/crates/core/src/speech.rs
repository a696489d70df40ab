//! Speech synthesis and transcription behind two channels: `console`, where
//! text stands in for audio and speaking takes a simulated duration, and
//! `audio`, an adapter slot for real devices.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::story::Speaker;
use crate::text::word_count;

pub const MIN_SPEAKING_MS: u64 = 1000;
pub const MS_PER_WORD: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Audio,
    Console,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub speaker: Speaker,
    pub started_at: u64,
    pub ended_at: u64,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpeechError {
    #[error("nothing to say")]
    EmptyText,
    #[error("final utterance is empty")]
    EmptyUtterance,
    #[error("another listen window is already open")]
    Busy,
    #[error("no speech before the deadline")]
    Timeout,
    #[error("listen window cancelled")]
    Cancelled,
    #[error("audio device failure: {0}")]
    AudioDeviceFailure(String),
    #[error("recognizer failure: {0}")]
    RecognizerFailure(String),
}

/// Simulated time to say `text`: 300 ms per word, at least one second.
pub fn speaking_duration_ms(text: &str) -> u64 {
    (word_count(text) as u64 * MS_PER_WORD).max(MIN_SPEAKING_MS)
}

pub trait Voice: Send {
    fn channel(&self) -> Channel;

    /// Says `text` and returns once it has been said.
    fn speak(&mut self, text: &str, clock: &dyn Clock) -> Result<Utterance, SpeechError>;
}

/// Reference voice: the text is the output, and the clock is held for the
/// simulated speaking duration.
#[derive(Debug, Default)]
pub struct ConsoleVoice;

impl Voice for ConsoleVoice {
    fn channel(&self) -> Channel {
        Channel::Console
    }

    fn speak(&mut self, text: &str, clock: &dyn Clock) -> Result<Utterance, SpeechError> {
        if text.trim().is_empty() {
            return Err(SpeechError::EmptyText);
        }
        let started_at = clock.now_ms();
        clock.sleep_ms(speaking_duration_ms(text));
        Ok(Utterance {
            text: text.to_string(),
            speaker: Speaker::Robot,
            started_at,
            ended_at: clock.now_ms(),
            channel: Channel::Console,
        })
    }
}

/// Playback device for [`AudioVoice`]; returns once playback has finished.
pub trait AudioBackend: Send {
    fn play(&mut self, text: &str) -> Result<(), String>;
}

pub struct AudioVoice<B> {
    backend: B,
}

impl<B: AudioBackend> AudioVoice<B> {
    pub fn new(backend: B) -> Self {
        Self { backend }
    }
}

impl<B: AudioBackend> Voice for AudioVoice<B> {
    fn channel(&self) -> Channel {
        Channel::Audio
    }

    fn speak(&mut self, text: &str, clock: &dyn Clock) -> Result<Utterance, SpeechError> {
        if text.trim().is_empty() {
            return Err(SpeechError::EmptyText);
        }
        let started_at = clock.now_ms();
        self.backend.play(text).map_err(SpeechError::AudioDeviceFailure)?;
        Ok(Utterance {
            text: text.to_string(),
            speaker: Speaker::Robot,
            started_at,
            ended_at: clock.now_ms().max(started_at),
            channel: Channel::Audio,
        })
    }
}

/// Speech recognizer for the audio channel: yields final results only.
pub trait Recognizer: Send {
    fn next_final(&mut self, wait: Duration) -> Result<Option<String>, String>;
}

/// Hands out listen windows, at most one at a time.
#[derive(Debug, Clone)]
pub struct Transcriber {
    channel: Channel,
    active: Arc<AtomicBool>,
}

impl Transcriber {
    pub fn new(channel: Channel) -> Self {
        Self {
            channel,
            active: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn console() -> Self {
        Self::new(Channel::Console)
    }

    pub fn is_listening(&self) -> bool {
        self.active.load(Ordering::SeqCst)
    }

    /// Opens a window that accepts one final utterance until `deadline_at`.
    pub fn open(&self, now_ms: u64, deadline_at: u64) -> Result<ListenWindow, SpeechError> {
        if self
            .active
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .is_err()
        {
            return Err(SpeechError::Busy);
        }
        Ok(ListenWindow {
            active: Arc::clone(&self.active),
            cancelled: Arc::new(AtomicBool::new(false)),
            opened_at: now_ms,
            deadline_at,
            channel: self.channel,
        })
    }
}

/// Cancels a listen window from another thread.
#[derive(Debug, Clone)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }
}

#[derive(Debug)]
pub struct ListenWindow {
    active: Arc<AtomicBool>,
    cancelled: Arc<AtomicBool>,
    opened_at: u64,
    deadline_at: u64,
    channel: Channel,
}

impl ListenWindow {
    pub fn deadline_at(&self) -> u64 {
        self.deadline_at
    }

    pub fn opened_at(&self) -> u64 {
        self.opened_at
    }

    pub fn canceller(&self) -> CancelToken {
        CancelToken(Arc::clone(&self.cancelled))
    }

    fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    /// Turns a final transcription received at `now_ms` into an utterance.
    pub fn accept(self, text: &str, now_ms: u64) -> Result<Utterance, SpeechError> {
        if self.is_cancelled() {
            return Err(SpeechError::Cancelled);
        }
        if now_ms > self.deadline_at {
            return Err(SpeechError::Timeout);
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(SpeechError::EmptyUtterance);
        }
        Ok(Utterance {
            text: text.to_string(),
            speaker: Speaker::Human,
            started_at: self.opened_at,
            ended_at: now_ms.max(self.opened_at),
            channel: self.channel,
        })
    }

    /// Closes the window because its deadline passed.
    pub fn expire(self) -> SpeechError {
        SpeechError::Timeout
    }

    /// Blocks for the first non-empty line from `lines`. On cancellation any
    /// lines already queued are drained so they cannot leak into the next
    /// window.
    pub fn wait_line(self, lines: &Receiver<String>, clock: &dyn Clock) -> Result<Utterance, SpeechError> {
        const SLICE: Duration = Duration::from_millis(20);
        loop {
            if self.is_cancelled() {
                while lines.try_recv().is_ok() {}
                return Err(SpeechError::Cancelled);
            }
            let now = clock.now_ms();
            if now >= self.deadline_at {
                return Err(self.expire());
            }
            match lines.recv_timeout(clock.real(self.deadline_at - now).min(SLICE)) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => {
                    if self.is_cancelled() {
                        continue;
                    }
                    let now = clock.now_ms().min(self.deadline_at);
                    return self.accept(&line, now);
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(SpeechError::RecognizerFailure("input closed".into()))
                }
            }
        }
    }

    /// Blocks on an audio recognizer for the first final result.
    pub fn wait_recognizer(
        self,
        recognizer: &mut dyn Recognizer,
        clock: &dyn Clock,
    ) -> Result<Utterance, SpeechError> {
        loop {
            if self.is_cancelled() {
                return Err(SpeechError::Cancelled);
            }
            let now = clock.now_ms();
            if now >= self.deadline_at {
                return Err(self.expire());
            }
            let wait = clock.real(self.deadline_at - now).min(Duration::from_millis(100));
            match recognizer.next_final(wait).map_err(SpeechError::RecognizerFailure)? {
                Some(text) if !text.trim().is_empty() => {
                    let now = clock.now_ms().min(self.deadline_at);
                    return self.accept(&text, now);
                }
                _ => {
                    if wait.is_zero() {
                        clock.sleep_ms(self.deadline_at - now);
                    }
                }
            }
        }
    }
}

impl Drop for ListenWindow {
    fn drop(&mut self) {
        self.active.store(false, Ordering::SeqCst);
    }
}
