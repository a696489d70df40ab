use narravine_core::scene::SceneError;
use narravine_core::session::SessionError;
use narravine_core::store::StoreError;
use narravine_core::ConfigError;
use narravine_questionnaires::QuestionnaireError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("module boot failure: {0}")]
    ModuleBoot(String),
    #[error("session: {0}")]
    Session(SessionError),
    #[error("session store: {0}")]
    Store(#[from] StoreError),
    #[error("questionnaires: {0}")]
    Questionnaire(#[from] QuestionnaireError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<SessionError> for SupervisorError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Config(c) => Self::Config(c),
            SessionError::Scene(s) => Self::Scene(s),
            other => Self::Session(other),
        }
    }
}

impl SupervisorError {
    /// 2 for bad configuration, 3 when a module cannot start, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Scene(_) => 2,
            Self::ModuleBoot(_) => 3,
            _ => 1,
        }
    }
}
