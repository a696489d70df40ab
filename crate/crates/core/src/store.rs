//! Session persistence and the quantitative indicators computed from it.
//!
//! A session directory holds `session.meta`, one `trial_<k>.rec` per trial,
//! the line-delimited `fsm.log` and `genai.log`, and `transcript.txt`.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::Phase;
use crate::genai::StickerDescription;
use crate::manifest::StickerId;
use crate::perception::CubeObservation;
use crate::story::StoryTranscript;
use crate::text::mentions;

pub const META_FILE: &str = "session.meta";
pub const FSM_LOG: &str = "fsm.log";
pub const GENAI_LOG: &str = "genai.log";
pub const TRANSCRIPT_FILE: &str = "transcript.txt";
pub const CUBES_PER_TRIAL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failed,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    StickerDetection,
    VoiceTimeout,
    LlmFailure,
    CubeDrop,
    Other,
}

impl FailureKind {
    pub const ALL: [FailureKind; 5] = [
        FailureKind::StickerDetection,
        FailureKind::VoiceTimeout,
        FailureKind::LlmFailure,
        FailureKind::CubeDrop,
        FailureKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::StickerDetection => "sticker_detection",
            FailureKind::VoiceTimeout => "voice_timeout",
            FailureKind::LlmFailure => "llm_failure",
            FailureKind::CubeDrop => "cube_drop",
            FailureKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    pub llm_added_elements: bool,
    pub llm_fixed_human: bool,
}

/// Operator annotation; `trial` defaults to the current or latest trial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationInput {
    #[serde(default)]
    pub trial: Option<u32>,
    #[serde(default)]
    pub llm_added_elements: Option<bool>,
    #[serde(default)]
    pub llm_fixed_human: Option<bool>,
}

impl Annotations {
    pub fn apply(&mut self, input: &AnnotationInput) {
        if let Some(v) = input.llm_added_elements {
            self.llm_added_elements = v;
        }
        if let Some(v) = input.llm_fixed_human {
            self.llm_fixed_human = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    /// Stickers actually handed over, in order.
    pub cube_sequence: Vec<StickerId>,
    #[serde(default)]
    pub observations: Vec<CubeObservation>,
    pub vlm_descriptions: Vec<StickerDescription>,
    pub transcript: StoryTranscript,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
    #[serde(default)]
    pub annotations: Annotations,
    /// Phases visited during the trial, in order, without repeats.
    #[serde(default)]
    pub phases: Vec<Phase>,
    pub started_at: u64,
    pub ended_at: u64,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |why: &str| Err(StoreError::InvalidRecord(format!("trial {}: {why}", self.trial_index)));
        match self.outcome {
            Outcome::Failed if self.failure_kind.is_none() => bad("failed without a failure kind"),
            Outcome::Success if self.failure_kind.is_some() => bad("success with a failure kind"),
            Outcome::Success if self.cube_sequence.len() != CUBES_PER_TRIAL => bad("completed with a short cube sequence"),
            _ if self.ended_at < self.started_at => bad("ends before it starts"),
            _ => Ok(()),
        }
    }

    pub fn file_name(trial_index: u32) -> String {
        format!("trial_{trial_index}.rec")
    }
}

/// A description agrees with its cube when it names the sticker's head noun.
pub fn description_agrees(d: &StickerDescription) -> bool {
    mentions(&d.text, d.source_cube.head_noun())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub records: usize,
    pub successes: usize,
    pub failed: usize,
    pub aborted: usize,
    pub success_rate: f64,
    pub descriptions: usize,
    pub agreeing_descriptions: usize,
    /// Per handed cube; zero when no cube was described.
    pub vlm_agreement: f64,
    pub llm_added: usize,
    pub llm_addition_rate: f64,
    pub llm_fixed: usize,
    pub llm_fix_rate: f64,
    pub failures: BTreeMap<FailureKind, usize>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(records: &[TrialRecord]) -> Result<SessionMetrics, StoreError> {
    if records.is_empty() {
        return Err(StoreError::EmptyInput);
    }
    let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let successes = count(&|r| r.outcome == Outcome::Success);
    let failed = count(&|r| r.outcome == Outcome::Failed);
    let aborted = count(&|r| r.outcome == Outcome::Aborted);
    let llm_added = count(&|r| r.annotations.llm_added_elements);
    let llm_fixed = count(&|r| r.annotations.llm_fixed_human);
    let descriptions = records.iter().map(|r| r.vlm_descriptions.len()).sum();
    let agreeing_descriptions = records
        .iter()
        .flat_map(|r| &r.vlm_descriptions)
        .filter(|d| description_agrees(d))
        .count();
    let mut failures = BTreeMap::new();
    for r in records.iter().filter(|r| r.outcome == Outcome::Failed) {
        *failures.entry(r.failure_kind.unwrap_or(FailureKind::Other)).or_insert(0) += 1;
    }
    let n = records.len();
    Ok(SessionMetrics {
        records: n,
        successes,
        failed,
        aborted,
        success_rate: ratio(successes, n),
        descriptions,
        agreeing_descriptions,
        vlm_agreement: ratio(agreeing_descriptions, descriptions),
        llm_added,
        llm_addition_rate: ratio(llm_added, n),
        llm_fixed,
        llm_fix_rate: ratio(llm_fixed, n),
        failures,
    })
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no trial records")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Writes `record` as `trial_<k>.rec` in `dir`.
pub fn persist(record: &TrialRecord, dir: &Path) -> Result<PathBuf, StoreError> {
    let path = dir.join(TrialRecord::file_name(record.trial_index));
    write_json(&path, record)?;
    Ok(path)
}

pub fn load_record(path: &Path) -> Result<TrialRecord, StoreError> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub participant_id: String,
    pub trials_total: u32,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    pub model_name: String,
    pub describer_prompt_sha256: String,
    pub narrator_prompt_sha256: String,
    /// System prompts that differ from the shipped ones.
    #[serde(default)]
    pub prompt_overrides: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended: Option<SessionEnd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnd {
    pub at_ms: u64,
    pub aborted: bool,
    pub trials_recorded: usize,
}

/// Everything read back from a session directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub meta: Option<SessionMeta>,
    pub records: Vec<TrialRecord>,
}

pub fn load_session(dir: &Path) -> Result<SessionData, StoreError> {
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() { Some(read_json(&meta_path)?) } else { None };
    let mut records = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_record = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("trial_") && n.ends_with(".rec"));
        if is_record {
            records.push(load_record(&path)?);
        }
    }
    records.sort_by_key(|r| r.trial_index);
    Ok(SessionData { meta, records })
}

/// Single writer for a session directory. Log lines are flushed as they are
/// written so a crash leaves every completed line on disk.
#[derive(Debug)]
pub struct SessionWriter {
    dir: PathBuf,
    meta: SessionMeta,
    fsm_log: File,
    genai_log: File,
    transcript: File,
}

fn open_append(path: &Path) -> Result<File, StoreError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

impl SessionWriter {
    pub fn create(dir: &Path, meta: SessionMeta) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&dir.join(META_FILE), &meta)?;
        Ok(Self {
            fsm_log: open_append(&dir.join(FSM_LOG))?,
            genai_log: open_append(&dir.join(GENAI_LOG))?,
            transcript: open_append(&dir.join(TRANSCRIPT_FILE))?,
            dir: dir.to_path_buf(),
            meta,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn line<T: Serialize>(file: &mut File, path: &Path, value: &T) -> Result<(), StoreError> {
        let mut text = serde_json::to_string(value).expect("log lines serialize");
        text.push('\n');
        file.write_all(text.as_bytes()).map_err(io_err(path))
    }

    pub fn log_transition<T: Serialize>(&mut self, entry: &T) -> Result<(), StoreError> {
        Self::line(&mut self.fsm_log, &self.dir.join(FSM_LOG), entry)
    }

    pub fn log_genai<T: Serialize>(&mut self, entry: &T) -> Result<(), StoreError> {
        Self::line(&mut self.genai_log, &self.dir.join(GENAI_LOG), entry)
    }

    pub fn log_transcript(&mut self, at_ms: u64, who: &str, text: &str) -> Result<(), StoreError> {
        let path = self.dir.join(TRANSCRIPT_FILE);
        writeln!(self.transcript, "[{at_ms:>9}] {who}: {text}").map_err(io_err(&path))
    }

    pub fn persist(&self, record: &TrialRecord) -> Result<PathBuf, StoreError> {
        persist(record, &self.dir)
    }

    pub fn finish(&mut self, end: SessionEnd) -> Result<(), StoreError> {
        self.meta.ended = Some(end);
        write_json(&self.dir.join(META_FILE), &self.meta)
    }
}
