//! Session configuration, read from a TOML file. Relative paths resolve
//! against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{FsmConfig, Script, Timeouts};
use crate::genai::{PromptConfig, VlmInput, DESCRIBER_SYSTEM_PROMPT, NARRATOR_SYSTEM_PROMPT};
use crate::manifest::{ManifestError, StickerManifest};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {detail}")]
    Io { path: PathBuf, detail: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{what} not found: {path}")]
    MissingFile { what: &'static str, path: PathBuf },
    #[error("sticker manifest: {0}")]
    Manifest(#[from] ManifestError),
    #[error("invalid value for {field}: {detail}")]
    Invalid { field: &'static str, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenAiSection {
    pub transport: TransportKind,
    /// Mock fixture; without one the mock echoes its input.
    pub fixture: Option<PathBuf>,
    pub model: String,
    pub base_url: Option<String>,
    pub vlm_input: VlmInput,
    pub describer_temperature: f64,
    pub narrator_temperature: f64,
    pub max_retries: u32,
    pub describer_system_prompt: Option<String>,
    pub narrator_system_prompt: Option<String>,
}

impl Default for GenAiSection {
    fn default() -> Self {
        let p = PromptConfig::default();
        Self {
            transport: TransportKind::Mock,
            fixture: None,
            model: p.model_name,
            base_url: None,
            vlm_input: p.vlm_input,
            describer_temperature: p.describer_temperature,
            narrator_temperature: p.narrator_temperature,
            max_retries: p.max_retries,
            describer_system_prompt: None,
            narrator_system_prompt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub max: u32,
}

impl Default for RetrySection {
    fn default() -> Self {
        Self { max: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionSection {
    pub misdetection_probability: f64,
    /// Cube observations below this confidence count as misdetections.
    pub detection_threshold: f64,
    pub face_threshold: f64,
    pub seed: u64,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        Self {
            misdetection_probability: 0.0,
            detection_threshold: 0.5,
            face_threshold: 0.5,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechSection {
    /// Real seconds per simulated second in live sessions; replays ignore it.
    pub time_scale: f64,
}

impl Default for SpeechSection {
    fn default() -> Self {
        Self { time_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub trials_total: u32,
    pub participant_id: String,
    /// Sticker manifest; the built-in one when absent.
    pub manifest: Option<PathBuf>,
    /// Scene script path, or "interactive".
    pub scene: String,
    pub port_base: Option<u16>,
    pub session_dir: Option<PathBuf>,
    pub feedback_seed: u64,
    pub genai: GenAiSection,
    pub timeouts: Timeouts,
    pub retries: RetrySection,
    pub perception: PerceptionSection,
    pub speech: SpeechSection,
    pub script: Script,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            trials_total: 3,
            participant_id: "anonymous".to_string(),
            manifest: None,
            scene: "interactive".to_string(),
            port_base: None,
            session_dir: None,
            feedback_seed: FsmConfig::default().feedback_seed,
            genai: GenAiSection::default(),
            timeouts: Timeouts::default(),
            retries: RetrySection::default(),
            perception: PerceptionSection::default(),
            speech: SpeechSection::default(),
            script: Script::default(),
        }
    }
}

impl SessionConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.manifest.as_mut() {
            join(p);
        }
        if let Some(p) = self.genai.fixture.as_mut() {
            join(p);
        }
        if let Some(p) = self.session_dir.as_mut() {
            join(p);
        }
        if !self.is_interactive() && Path::new(&self.scene).is_relative() {
            self.scene = base.join(&self.scene).to_string_lossy().into_owned();
        }
    }

    pub fn is_interactive(&self) -> bool {
        self.scene == "interactive"
    }

    pub fn scene_path(&self) -> Option<&Path> {
        (!self.is_interactive()).then(|| Path::new(&self.scene))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials_total < 1 {
            return Err(ConfigError::Invalid {
                field: "trials_total",
                detail: "must be at least 1".into(),
            });
        }
        let p = &self.perception;
        for (field, v) in [
            ("perception.misdetection_probability", p.misdetection_probability),
            ("perception.detection_threshold", p.detection_threshold),
            ("perception.face_threshold", p.face_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid {
                    field,
                    detail: format!("{v} is outside [0, 1]"),
                });
            }
        }
        if !(self.speech.time_scale > 0.0 && self.speech.time_scale.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "speech.time_scale",
                detail: "must be positive".into(),
            });
        }
        if let Some(path) = &self.manifest {
            if !path.is_file() {
                return Err(ConfigError::MissingFile {
                    what: "sticker manifest",
                    path: path.clone(),
                });
            }
            StickerManifest::load(path)?;
        }
        if let Some(path) = self.scene_path() {
            if !path.is_file() {
                return Err(ConfigError::MissingFile {
                    what: "scene script",
                    path: path.to_path_buf(),
                });
            }
        }
        if let Some(path) = &self.genai.fixture {
            if !path.is_file() {
                return Err(ConfigError::MissingFile {
                    what: "mock fixture",
                    path: path.clone(),
                });
            }
        }
        if self.genai.transport == TransportKind::Live && self.genai.base_url.is_none() {
            return Err(ConfigError::Invalid {
                field: "genai.base_url",
                detail: "required for the live transport".into(),
            });
        }
        Ok(())
    }

    pub fn manifest(&self) -> Result<StickerManifest, ConfigError> {
        match &self.manifest {
            Some(path) => Ok(StickerManifest::load(path)?),
            None => Ok(StickerManifest::canonical()),
        }
    }

    pub fn fsm_config(&self) -> FsmConfig {
        FsmConfig {
            trials_total: self.trials_total,
            max_retries: self.retries.max,
            timeouts: self.timeouts.clone(),
            script: self.script.clone(),
            feedback_seed: self.feedback_seed,
        }
    }

    pub fn prompt_config(&self) -> PromptConfig {
        let g = &self.genai;
        PromptConfig {
            describer_system_prompt: g
                .describer_system_prompt
                .clone()
                .unwrap_or_else(|| DESCRIBER_SYSTEM_PROMPT.to_string()),
            narrator_system_prompt: g
                .narrator_system_prompt
                .clone()
                .unwrap_or_else(|| NARRATOR_SYSTEM_PROMPT.to_string()),
            model_name: g.model.clone(),
            describer_temperature: g.describer_temperature,
            narrator_temperature: g.narrator_temperature,
            max_retries: g.max_retries,
            vlm_input: g.vlm_input,
            deadline_ms: self.timeouts.genai_ms,
        }
    }
}
